use criterion::{criterion_group, criterion_main, Criterion};
use fairtrade_core::actors::{run_scenario, ScenarioParams, StrategyProfile};
use fairtrade_core::game::{backward_induction, enforced_payoff, nash_equilibria, raw_payoff, verify_table};

fn solve(c: &mut Criterion) {
    c.bench_function("verify_table", |b| b.iter(|| verify_table(10, 2).unwrap()));
    c.bench_function("backward_induction/enforced", |b| b.iter(|| backward_induction(enforced_payoff, 10, 2)));
    c.bench_function("nash_equilibria/raw", |b| b.iter(|| nash_equilibria(raw_payoff, 10, 2)));
}

fn scenario(c: &mut Criterion) {
    let params = ScenarioParams::sized(8, 4096);
    let mut g = c.benchmark_group("run_scenario");
    g.sample_size(20);
    for code in ["aei", "cei", "aek"] {
        let p: StrategyProfile = code.parse().unwrap();
        g.bench_function(code, |b| b.iter(|| run_scenario(p, &params).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, solve, scenario);
criterion_main!(benches);
