use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchReport, HarnessError};
use crate::actors::{run_scenario, Role, RunTranscript, ScenarioParams, StrategyProfile};
use crate::contracts::Verdict;
use crate::meter::{OpCounters, PhaseCounters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// One JSON object per line.
    #[default]
    Json,
    Csv,
    Text,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "text" => Ok(ReportFormat::Text),
            _ => Err(HarnessError::InvalidConfig(format!("unknown report format {s:?}"))),
        }
    }
}

/// One scenario outcome. Deltas and net gains are in base units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub profile: StrategyProfile,
    pub funded: bool,
    pub recovered: bool,
    pub seller_verdict: Option<Verdict>,
    pub provider_verdict: Option<Verdict>,
    pub seller_delta: i64,
    pub consumer_delta: i64,
    pub provider_delta: i64,
    pub seller_net: i64,
    pub consumer_net: i64,
    pub provider_net: i64,
}

impl From<&RunTranscript> for MatrixRow {
    fn from(t: &RunTranscript) -> MatrixRow {
        MatrixRow {
            profile: t.profile,
            funded: t.funded,
            recovered: t.recovered,
            seller_verdict: t.seller_verdict,
            provider_verdict: t.provider_verdict,
            seller_delta: t.delta(Role::Seller),
            consumer_delta: t.delta(Role::Consumer),
            provider_delta: t.delta(Role::Provider),
            seller_net: t.net_gain(Role::Seller),
            consumer_net: t.net_gain(Role::Consumer),
            provider_net: t.net_gain(Role::Provider),
        }
    }
}

/// Runs all 64 profiles.
pub fn matrix_rows(params: &ScenarioParams) -> Result<Vec<MatrixRow>, HarnessError> {
    StrategyProfile::all().into_iter().map(|p| Ok(MatrixRow::from(&run_scenario(p, params)?))).collect()
}

fn verdict(v: Option<Verdict>) -> &'static str {
    match v {
        None => "-",
        Some(Verdict::Upheld) => "upheld",
        Some(Verdict::Denied) => "denied",
    }
}

fn json_lines<T: Serialize>(items: &[T]) -> String {
    items.iter().map(|i| serde_json::to_string(i).expect("report rows serialize") + "\n").collect()
}

pub const MATRIX_CSV_HEADER: &str = "profile,funded,recovered,seller_verdict,provider_verdict,seller_delta,consumer_delta,provider_delta,seller_net,consumer_net,provider_net";

pub fn render_matrix(rows: &[MatrixRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => json_lines(rows),
        ReportFormat::Csv => {
            let mut out = format!("{MATRIX_CSV_HEADER}\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.profile,
                    r.funded,
                    r.recovered,
                    verdict(r.seller_verdict),
                    verdict(r.provider_verdict),
                    r.seller_delta,
                    r.consumer_delta,
                    r.provider_delta,
                    r.seller_net,
                    r.consumer_net,
                    r.provider_net
                );
            }
            out
        }
        ReportFormat::Text => {
            let mut out = format!(
                "{:<7} {:>6} {:>9} {:>8} {:>8} {:>9} {:>9} {:>9}\n",
                "profile", "funded", "recovered", "seller", "provider", "d_seller", "d_consumer", "d_provider"
            );
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:<7} {:>6} {:>9} {:>8} {:>8} {:>9} {:>9} {:>9}",
                    r.profile.to_string(),
                    r.funded,
                    r.recovered,
                    verdict(r.seller_verdict),
                    verdict(r.provider_verdict),
                    r.seller_delta,
                    r.consumer_delta,
                    r.provider_delta
                );
            }
            out
        }
    }
}

pub const BENCH_CSV_HEADER: &str =
    "data_type,size,providers,slot,shards,repetitions,median_secs,mean_secs,stddev_secs,throughput_mib_s,recovered";

pub fn render_bench(reports: &[BenchReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => json_lines(reports),
        ReportFormat::Csv => {
            let mut out = format!("{BENCH_CSV_HEADER}\n");
            for r in reports {
                let c = &r.config;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.3},{}",
                    c.data_type,
                    c.size,
                    c.providers,
                    c.slot,
                    r.shards,
                    c.repetitions,
                    r.median_secs,
                    r.mean_secs,
                    r.stddev_secs,
                    r.throughput_mib_s,
                    r.recovered
                );
            }
            out
        }
        ReportFormat::Text => {
            let mut out = format!(
                "{:<6} {:>10} {:>9} {:>10} {:>10} {:>9} {:>11}\n",
                "type", "size_mib", "providers", "median_s", "mean_s", "sigma_s", "mib_per_s"
            );
            for r in reports {
                let c = &r.config;
                let _ = writeln!(
                    out,
                    "{:<6} {:>10.1} {:>9} {:>10.3} {:>10.3} {:>9.3} {:>11.2}",
                    c.data_type.name(),
                    c.size as f64 / super::MIB as f64,
                    c.providers,
                    r.median_secs,
                    r.mean_secs,
                    r.stddev_secs,
                    r.throughput_mib_s
                );
            }
            out
        }
    }
}

fn phase_rows(c: &PhaseCounters) -> [(&'static str, OpCounters); 5] {
    [
        ("upload", c.upload),
        ("download", c.download),
        ("pay_provider", c.pay_provider),
        ("pay_seller", c.pay_seller),
        ("appeal", c.appeal),
    ]
}

pub const COUNTERS_CSV_HEADER: &str =
    "phase,sym_encryptions,asym_encryptions,sym_decryptions,asym_decryptions,tree_builds,proof_verifications";

pub fn render_counters(c: &PhaseCounters, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string(c).expect("counters serialize") + "\n",
        ReportFormat::Csv => {
            let mut out = format!("{COUNTERS_CSV_HEADER}\n");
            for (name, o) in phase_rows(c) {
                let (a, b, d, e, f, g) = o.as_tuple();
                let _ = writeln!(out, "{name},{a},{b},{d},{e},{f},{g}");
            }
            out
        }
        ReportFormat::Text => {
            let mut out =
                format!("{:<13} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n", "phase", "E", "E_A", "D", "D_A", "M", "V");
            for (name, o) in phase_rows(c) {
                let (a, b, d, e, f, g) = o.as_tuple();
                let _ = writeln!(out, "{name:<13} {a:>6} {b:>6} {d:>6} {e:>6} {f:>6} {g:>6}");
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::honest_trace;

    #[test]
    fn matrix_formats() {
        let params = ScenarioParams::sized(2, 32);
        let rows: Vec<MatrixRow> = ["aei", "cej"]
            .iter()
            .map(|c| MatrixRow::from(&run_scenario(c.parse().unwrap(), &params).unwrap()))
            .collect();
        let json = render_matrix(&rows, ReportFormat::Json);
        assert_eq!(json.lines().count(), 2);
        let back: MatrixRow = serde_json::from_str(json.lines().next().unwrap()).unwrap();
        assert_eq!(back, rows[0]);
        let csv = render_matrix(&rows, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().all(|l| l.split(',').count() == 11));
        assert!(csv.contains("cej,true,false,upheld,upheld"));
        assert!(render_matrix(&rows, ReportFormat::Text).contains("aei"));
    }

    #[test]
    fn counters_formats() {
        let c = honest_trace(4);
        assert!(render_counters(&c, ReportFormat::Csv).contains("upload,4,0,0,0,2,4"));
        let back: PhaseCounters = serde_json::from_str(&render_counters(&c, ReportFormat::Json)).unwrap();
        assert_eq!(back, c);
        assert_eq!(render_counters(&c, ReportFormat::Text).lines().count(), 6);
    }

    #[test]
    fn format_parse() {
        assert_eq!("CSV".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
