use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fairtrade_core::actors::{cheat_catalog, run_scenario, Role, ScenarioParams, ScenarioSpec, StrategyProfile};
use fairtrade_core::contracts::{DataId, OrderId};
use fairtrade_core::game::{
    backward_induction, check_admissible, nash_equilibria, raw_payoff_symbolic, sample_grid, verify_table, PayoffMode,
};
use fairtrade_core::harness::{
    bench_download, count_phase_ops, env_seed, matrix_rows, parse_payee, render_bench, render_counters, render_matrix,
    BenchConfig, BenchReport, DataSource, DataType, HarnessError, MatrixRow, ReportFormat, Session, Terms,
    DEFAULT_BANDWIDTH, MIB,
};
use fairtrade_core::ledger::tokens;
use fairtrade_core::sharding::DEFAULT_SLOT;

mod size;

#[derive(Parser)]
#[command(name = "fairtrade", version, about = "Fair-exchange data market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Honest trade end to end.
    Demo(DemoArgs),
    /// One strategy profile end to end.
    Scenario(ScenarioArgs),
    /// All 64 profiles.
    Matrix(MatrixArgs),
    /// Payoff table and equilibria.
    Game(GameArgs),
    /// Multi-provider download benchmark.
    Bench(BenchArgs),
    /// Re-render a JSON-lines report, or show operation counters.
    Report(ReportArgs),
    /// List a dataset (stateful).
    Register(RegisterArgs),
    /// Expose the challenged shards of a dataset (stateful).
    Expose(DataArg),
    /// Register and confirm a storage provider (stateful).
    Provide(ProvideArgs),
    /// Keyword search over live listings (stateful).
    Search(SearchArgs),
    /// Place and fund an order (stateful).
    Order(OrderArgs),
    /// Assign providers, open escrow and release keys (stateful).
    Select(OrderArg),
    /// Appeal against a payee (stateful).
    Appeal(AppealArgs),
    /// Close the appeal window and pay out (stateful).
    Settle(OrderArg),
    /// Return the seller's deposit (stateful).
    Withdraw(DataArg),
    /// Download, verify and decrypt an order's data (stateful).
    Recover(RecoverArgs),
    /// Balances, records and orders (stateful).
    Status(StateArg),
}

#[derive(Args)]
struct RunArgs {
    /// Shard count.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Shard size, e.g. 4096, 64K, 1M.
    #[arg(long, default_value = "1M", value_parser = size::parse)]
    slot: u64,
    /// Defaults to $BDTS_SEED, then 7.
    #[arg(long)]
    seed: Option<u64>,
    /// Appeal window in blocks.
    #[arg(long, default_value_t = 10)]
    window: u64,
}

impl RunArgs {
    fn params(&self, x: u64, y: u64) -> ScenarioParams {
        ScenarioParams {
            x,
            y,
            n: self.n,
            slot: self.slot as usize,
            seed: self.seed.unwrap_or_else(env_seed),
            appeal_window: self.window,
            ..ScenarioParams::default()
        }
    }
}

#[derive(Args)]
struct DemoArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Also write the transcript as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Seller, consumer and provider letters, e.g. `aei`.
    #[arg(long, default_value = "aei")]
    profile: String,
    #[arg(long, default_value_t = 10)]
    x: u64,
    #[arg(long, default_value_t = 2)]
    y: u64,
    #[command(flatten)]
    run: RunArgs,
    /// JSON scenario file (profile plus parameters); overrides the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Fail (exit 1) unless the consumer's recovery matches.
    #[arg(long)]
    expect_recovered: Option<bool>,
    /// Fail (exit 1) unless the order's funding matches.
    #[arg(long)]
    expect_funded: Option<bool>,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long, default_value_t = 10)]
    x: u64,
    #[arg(long, default_value_t = 2)]
    y: u64,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum GameAction {
    /// Evaluate the payoff table and solve it.
    Solve,
    /// Check the transcribed table against the payoff model.
    #[value(name = "verify_table", alias = "verify-table")]
    VerifyTable,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Raw,
    Enforced,
}

impl From<Mode> for PayoffMode {
    fn from(m: Mode) -> PayoffMode {
        match m {
            Mode::Raw => PayoffMode::Raw,
            Mode::Enforced => PayoffMode::Enforced,
        }
    }
}

#[derive(Args)]
struct GameArgs {
    #[arg(value_enum, default_value_t = GameAction::Solve)]
    action: GameAction,
    #[arg(long, default_value_t = 10, allow_negative_numbers = true)]
    x: i64,
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    y: i64,
    #[arg(long, value_enum, default_value_t = Mode::Enforced)]
    mode: Mode,
    /// Run over the 16 sample points instead of one (x, y).
    #[arg(long)]
    sweep: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON file mirroring the bench config; flags given explicitly win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    data_type: Option<CliDataType>,
    /// Data size, e.g. 10M, 100M.
    #[arg(long, value_parser = size::parse)]
    size: Option<u64>,
    /// Provider counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    providers: Vec<usize>,
    #[arg(long, value_parser = size::parse)]
    slot: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-connection cap in bytes per second, e.g. 60M; 0 disables it.
    #[arg(long, value_parser = size::parse)]
    bandwidth: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliDataType {
    Text,
    Image,
    Video,
}

impl From<CliDataType> for DataType {
    fn from(d: CliDataType) -> DataType {
        match d {
            CliDataType::Text => DataType::Text,
            CliDataType::Image => DataType::Image,
            CliDataType::Video => DataType::Video,
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// JSON lines written by `matrix` or `bench`; without it, the counters
    /// of an honest run are shown.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> ReportFormat {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Text => ReportFormat::Text,
        }
    }
}

#[derive(Args)]
struct StateArg {
    /// Market state file; created on first use.
    #[arg(long, default_value = "fairtrade-state.json")]
    state: PathBuf,
}

#[derive(Args)]
struct RegisterArgs {
    #[command(flatten)]
    state: StateArg,
    #[arg(long, default_value = "seller")]
    seller: String,
    /// Data file; without it synthetic data of `--size` is generated.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, default_value = "64K", value_parser = size::parse)]
    size: u64,
    #[arg(long, value_enum, default_value_t = CliDataType::Text)]
    data_type: CliDataType,
    #[arg(long, default_value = "16K", value_parser = size::parse)]
    slot: u64,
    /// Whole tokens.
    #[arg(long, default_value_t = 20)]
    price: u64,
    /// Base units per shard.
    #[arg(long, default_value_t = 10)]
    unit_price: u64,
    #[arg(long, default_value = "Synthetic dataset")]
    description: String,
}

#[derive(Args)]
struct DataArg {
    #[command(flatten)]
    state: StateArg,
    #[arg(long)]
    data: DataId,
}

#[derive(Args)]
struct ProvideArgs {
    #[command(flatten)]
    state: StateArg,
    #[arg(long)]
    data: DataId,
    #[arg(long, default_value = "provider")]
    provider: String,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    state: StateArg,
    keyword: String,
}

#[derive(Args)]
struct OrderArgs {
    #[command(flatten)]
    state: StateArg,
    #[arg(long)]
    data: DataId,
    #[arg(long, default_value = "consumer")]
    consumer: String,
    /// Base units; defaults to price plus download fees.
    #[arg(long)]
    payment: Option<u64>,
}

#[derive(Args)]
struct OrderArg {
    #[command(flatten)]
    state: StateArg,
    #[arg(long)]
    order: OrderId,
}

#[derive(Args)]
struct AppealArgs {
    #[command(flatten)]
    state: StateArg,
    #[arg(long)]
    order: OrderId,
    /// `seller` or `provider:<account>`.
    #[arg(long)]
    payee: String,
    #[arg(long, default_value_t = 0)]
    index: usize,
}

#[derive(Args)]
struct RecoverArgs {
    #[command(flatten)]
    state: StateArg,
    #[arg(long)]
    order: OrderId,
    /// Where to write the recovered bytes.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure kinds, mapped to exit codes by `main`.
enum Failure {
    /// Bad input: exit 2.
    Usage(String),
    /// A run finished but did not meet its expectation: exit 1.
    Check(String),
    /// Anything else: exit 1.
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Failure {
        match e {
            HarnessError::InvalidConfig(m) => Failure::Usage(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Demo(a) => demo(a),
        Command::Scenario(a) => scenario(a),
        Command::Matrix(a) => matrix(a),
        Command::Game(a) => game(a),
        Command::Bench(a) => bench(a),
        Command::Report(a) => report(a),
        Command::Register(a) => with_state(&a.state.state.clone(), |s| {
            let source = match &a.file {
                Some(path) => DataSource::File { path: path.clone() },
                None => DataSource::Synthetic { data_type: a.data_type.into(), size: a.size, seed: s.seed },
            };
            let terms = Terms { description: a.description.clone(), price: tokens(a.price), unit_price: a.unit_price };
            let id = s.register(&a.seller, source, a.slot as usize, terms)?;
            let r = s.market.record(id).map_err(runtime)?;
            Ok(
                json!({"data_id": id, "n": r.n, "r_d": r.r_d, "r_ed": r.r_ed, "exposure_indices": s.market.exposure_indices(id).map_err(runtime)?}),
            )
        }),
        Command::Expose(a) => {
            with_state(&a.state.state, |s| Ok(json!({"data_id": a.data, "verdict": s.expose(a.data)?})))
        }
        Command::Provide(a) => with_state(&a.state.state, |s| {
            s.provide(a.data, &a.provider)?;
            Ok(
                json!({"data_id": a.data, "provider": a.provider, "status": s.market.record(a.data).map_err(runtime)?.status}),
            )
        }),
        Command::Search(a) => with_state(&a.state.state, |s| Ok(json!(s.search(&a.keyword)))),
        Command::Order(a) => with_state(&a.state.state, |s| {
            let id = s.order(&a.consumer, a.data, a.payment)?;
            Ok(json!({"order_id": id, "escrowed": s.market.order(id).map_err(runtime)?.escrowed}))
        }),
        Command::Select(a) => {
            with_state(&a.state.state, |s| Ok(json!({"order_id": a.order, "assignments": s.select(a.order)?})))
        }
        Command::Appeal(a) => with_state(&a.state.state, |s| {
            let payee = parse_payee(&a.payee)?;
            Ok(
                json!({"order_id": a.order, "payee": a.payee, "index": a.index, "verdict": s.appeal(a.order, payee, a.index)?}),
            )
        }),
        Command::Settle(a) => with_state(&a.state.state, |s| {
            let paid: Vec<_> = s
                .settle(a.order)?
                .into_iter()
                .map(|(who, d, amount)| json!({"payee": who, "disbursement": d, "amount": amount}))
                .collect();
            Ok(json!({"order_id": a.order, "disbursements": paid, "balances": s.balances()}))
        }),
        Command::Withdraw(a) => with_state(&a.state.state, |s| {
            Ok(json!({"data_id": a.data, "returned": s.withdraw(a.data)?, "balances": s.balances()}))
        }),
        Command::Recover(a) => with_state(&a.state.state, |s| {
            let data = s.recover(a.order)?;
            if let Some(out) = &a.out {
                std::fs::write(out, &data).map_err(|e| runtime(HarnessError::Io(e)))?;
            }
            Ok(json!({"order_id": a.order, "bytes": data.len(), "recovered": true}))
        }),
        Command::Status(a) => with_state(&a.state, |s| {
            let records: Vec<_> = s
                .market
                .records()
                .map(|r| json!({"data_id": r.data_id, "description": r.description, "n": r.n, "status": r.status, "providers": r.providers.len()}))
                .collect();
            let orders: Vec<_> = s
                .market
                .orders()
                .map(|o| json!({"order_id": o.order_id, "data_id": o.data_id, "escrowed": o.escrowed, "status": o.status}))
                .collect();
            Ok(
                json!({"height": s.market.ledger.height(), "balances": s.balances(), "records": records, "orders": orders}),
            )
        }),
    }
}

/// Loads the session, applies `f`, prints its JSON result and saves.
fn with_state(path: &std::path::Path, f: impl FnOnce(&mut Session) -> Result<serde_json::Value, Failure>) -> Outcome {
    let mut s = Session::open(path, env_seed())?;
    let out = f(&mut s)?;
    s.save(path)?;
    println!("{out}");
    Ok(())
}

fn write_transcript(path: &Option<PathBuf>, t: &fairtrade_core::actors::RunTranscript) -> Outcome {
    if let Some(p) = path {
        std::fs::write(p, t.to_jsonl()).map_err(runtime)?;
    }
    Ok(())
}

fn demo(a: DemoArgs) -> Outcome {
    let params = a.run.params(10, 2);
    let t = run_scenario(StrategyProfile::HONEST, &params).map_err(|e| Failure::Usage(e.to_string()))?;
    write_transcript(&a.transcript, &t)?;
    let row = MatrixRow::from(&t);
    match a.format {
        Format::Text => {
            println!("honest trade: {} shards of {} bytes", params.n, params.slot);
            for role in Role::ALL {
                println!(
                    "  {:<8} delta {:>6}  net {:>6}",
                    format!("{role:?}").to_lowercase(),
                    t.delta(role),
                    t.net_gain(role)
                );
            }
            println!("recovery={}", t.recovered);
            print!("{}", render_counters(&count_phase_ops(&t), ReportFormat::Text));
        }
        f => print!("{}", render_matrix(&[row], f.into())),
    }
    if !t.recovered {
        return Err(Failure::Check("honest consumer did not recover the data".into()));
    }
    Ok(())
}

fn scenario(a: ScenarioArgs) -> Outcome {
    let (profile, params) = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let spec: ScenarioSpec = serde_json::from_str(&text).map_err(|e| Failure::Usage(e.to_string()))?;
            (spec.profile, spec.params)
        }
        None => {
            let profile: StrategyProfile = a
                .profile
                .parse()
                .map_err(|e: fairtrade_core::actors::ProfileParseError| Failure::Usage(e.to_string()))?;
            (profile, a.run.params(a.x, a.y))
        }
    };
    let t = run_scenario(profile, &params).map_err(|e| match e {
        fairtrade_core::actors::ScenarioError::InvalidParams(m) => Failure::Usage(m),
        other => runtime(other),
    })?;
    write_transcript(&a.transcript, &t)?;
    print!("{}", render_matrix(&[MatrixRow::from(&t)], a.format.into()));
    if let Some(case) = cheat_catalog().into_iter().find(|c| c.profile == profile) {
        case.check(&t).map_err(|e| Failure::Check(format!("{profile}: {e}")))?;
    }
    if let Some(want) = a.expect_recovered.filter(|w| *w != t.recovered) {
        return Err(Failure::Check(format!("{profile}: recovered {} but expected {want}", t.recovered)));
    }
    if let Some(want) = a.expect_funded.filter(|w| *w != t.funded) {
        return Err(Failure::Check(format!("{profile}: funded {} but expected {want}", t.funded)));
    }
    Ok(())
}

fn matrix(a: MatrixArgs) -> Outcome {
    let params = a.run.params(a.x, a.y);
    let rows = matrix_rows(&params)?;
    print!("{}", render_matrix(&rows, a.format.into()));
    Ok(())
}

fn game(a: GameArgs) -> Outcome {
    let points = if a.sweep { sample_grid() } else { vec![(a.x, a.y)] };
    for &(x, y) in &points {
        check_admissible(x, y).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match a.action {
        GameAction::VerifyTable => {
            let mut bad = 0;
            for (x, y) in points {
                let r = verify_table(x, y).map_err(runtime)?;
                bad += r.mismatches.len();
                match a.format {
                    Format::Text => {
                        println!("x={x:<3} y={y:<3} checked={} mismatches={}", r.checked, r.mismatches.len())
                    }
                    _ => println!("{}", serde_json::to_string(&r).map_err(runtime)?),
                }
                for m in &r.mismatches {
                    eprintln!("  {m:?}");
                }
            }
            if bad > 0 {
                return Err(Failure::Check(format!("{bad} table cells disagree with the model")));
            }
            Ok(())
        }
        GameAction::Solve => {
            let mode: PayoffMode = a.mode.into();
            let f = |p, x, y| mode.payoff(p, x, y);
            for (x, y) in points {
                let spe = backward_induction(f, x, y);
                let nash = nash_equilibria(f, x, y);
                match a.format {
                    Format::Text => {
                        if !a.sweep {
                            println!(
                                "{:<7} {:<30} {:>16}",
                                "profile",
                                "symbolic",
                                format!("{} (x={x},y={y})", mode.name())
                            );
                            for p in StrategyProfile::all() {
                                println!(
                                    "{:<7} {:<30} {:>16}",
                                    p.to_string(),
                                    raw_payoff_symbolic(p).to_string(),
                                    mode.payoff(p, x, y).to_string()
                                );
                            }
                        }
                        let nash: Vec<String> = nash.iter().map(|p| p.to_string()).collect();
                        println!(
                            "x={x} y={y} mode={} spne={} payoff={} nash=[{}]",
                            mode.name(),
                            spe.outcome,
                            spe.payoff,
                            nash.join(",")
                        );
                    }
                    _ => {
                        if !a.sweep {
                            for p in StrategyProfile::all() {
                                let v = mode.payoff(p, x, y);
                                println!(
                                    "{}",
                                    json!({"profile": p, "symbolic": raw_payoff_symbolic(p).to_string(), "payoff": [v.seller, v.consumer, v.provider]})
                                );
                            }
                        }
                        println!(
                            "{}",
                            json!({"x": x, "y": y, "mode": mode.name(), "spne": spe.outcome, "payoff": [spe.payoff.seller, spe.payoff.consumer, spe.payoff.provider], "nash": nash})
                        );
                    }
                }
            }
            Ok(())
        }
    }
}

fn bench(a: BenchArgs) -> Outcome {
    let base = match &a.config {
        Some(path) => BenchConfig::from_json_file(path)?,
        None => {
            BenchConfig { size: 10 * MIB, slot: DEFAULT_SLOT, bandwidth: DEFAULT_BANDWIDTH, ..BenchConfig::default() }
        }
    };
    let base = BenchConfig {
        data_type: a.data_type.map(Into::into).unwrap_or(base.data_type),
        size: a.size.unwrap_or(base.size),
        slot: a.slot.map(|s| s as usize).unwrap_or(base.slot),
        repetitions: a.reps.unwrap_or(base.repetitions),
        seed: a.seed.unwrap_or(base.seed),
        bandwidth: a.bandwidth.unwrap_or(base.bandwidth),
        ..base
    };
    let counts = if a.providers.is_empty() { vec![base.providers] } else { a.providers.clone() };
    let mut reports: Vec<BenchReport> = Vec::new();
    for providers in counts {
        let cfg = BenchConfig { providers, ..base.clone() };
        cfg.validate()?;
        let r = bench_download(&cfg)?;
        if !r.recovered {
            return Err(Failure::Check(format!("{providers} providers: data not recovered")));
        }
        reports.push(r);
    }
    print!("{}", render_bench(&reports, a.format.into()));
    Ok(())
}

fn report(a: ReportArgs) -> Outcome {
    let Some(path) = &a.input else {
        let t = run_scenario(StrategyProfile::HONEST, &a.run.params(10, 2)).map_err(runtime)?;
        print!("{}", render_counters(&count_phase_ops(&t), a.format.into()));
        return Ok(());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let bad = |e: serde_json::Error| Failure::Usage(format!("{}: {e}", path.display()));
    let is_bench = lines
        .first()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).map(|v| v.get("samples").is_some()))
        .transpose()
        .map_err(bad)?
        .unwrap_or(false);
    if is_bench {
        let reports =
            lines.iter().map(|l| serde_json::from_str(l)).collect::<Result<Vec<BenchReport>, _>>().map_err(bad)?;
        print!("{}", render_bench(&reports, a.format.into()));
    } else {
        let rows = lines.iter().map(|l| serde_json::from_str(l)).collect::<Result<Vec<MatrixRow>, _>>().map_err(bad)?;
        print!("{}", render_matrix(&rows, a.format.into()));
    }
    Ok(())
}
