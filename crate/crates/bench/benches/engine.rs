//! End-to-end benchmarks: dataset generation, batch rollouts per matchup,
//! and judging.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use tomsb_core::agents::AgentSpec;
use tomsb_core::engine::{rollout_batch, RolloutPlan};
use tomsb_core::judge::{aggregate_metrics, judge_batch, JudgeConfig};
use tomsb_core::scenario::{generate_scenarios, ScenarioConfig};

fn bench_generation(c: &mut Criterion) {
    c.bench_function("generate_scenarios_30", |b| {
        b.iter(|| {
            let s = generate_scenarios(black_box(42), 30, &ScenarioConfig::default()).unwrap();
            black_box(s)
        })
    });
}

fn bench_rollouts(c: &mut Criterion) {
    let scenarios = generate_scenarios(42, 30, &ScenarioConfig::default()).unwrap();
    let plan = RolloutPlan {
        k_per_scenario: 1,
        max_turns: 15,
        seed: 7,
        workers: 1,
    };
    let mut group = c.benchmark_group("rollout_30");
    for defender in ["refuse", "naive_mislead", "tom_double_agent"] {
        group.bench_function(defender, |b| {
            b.iter(|| {
                let t = rollout_batch(
                    &scenarios,
                    &AgentSpec::scripted("base"),
                    &AgentSpec::scripted(defender),
                    &plan,
                )
                .unwrap();
                black_box(t)
            })
        });
    }
    group.finish();
}

fn bench_judging(c: &mut Criterion) {
    let scenarios = generate_scenarios(42, 30, &ScenarioConfig::default()).unwrap();
    let plan = RolloutPlan {
        k_per_scenario: 2,
        max_turns: 15,
        seed: 7,
        workers: 1,
    };
    let trajs = rollout_batch(
        &scenarios,
        &AgentSpec::scripted("base"),
        &AgentSpec::scripted("tom_double_agent"),
        &plan,
    )
    .unwrap();
    c.bench_function("judge_and_aggregate_60", |b| {
        b.iter_batched(
            || trajs.clone(),
            |trajs| {
                let (records, n_error) =
                    judge_batch(&trajs, &scenarios, &JudgeConfig::default()).unwrap();
                let report = aggregate_metrics(&records, &scenarios, n_error).unwrap();
                black_box(report)
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_generation, bench_rollouts, bench_judging);
criterion_main!(benches);
