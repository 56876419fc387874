use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use segregation_bench::{bench_rng, order_book};
use segregation_core::engine::{initial_agents, run_period};
use segregation_core::meanfield::{critical_temperature, find_fixed_points};
use segregation_core::{clear_market, ModelParams};

fn clearing(c: &mut Criterion) {
    let book = order_book(100);
    let mut rng = bench_rng();
    c.bench_function("clear_market/100", |b| b.iter(|| clear_market(black_box(&book), 0.3, &mut rng)));
}

fn period(c: &mut Criterion) {
    let params = ModelParams::default();
    let mut agents = initial_agents(&params);
    let mut rng = bench_rng();
    c.bench_function("run_period/200", |b| b.iter(|| run_period(&mut agents, &params, &mut rng)));
}

fn meanfield(c: &mut Criterion) {
    let params = ModelParams::two_group();
    c.bench_function("find_fixed_points/two_group", |b| {
        b.iter(|| find_fixed_points(black_box(&params), 0.29).unwrap())
    });
    c.bench_function("critical_temperature/two_group", |b| {
        b.iter(|| critical_temperature(black_box(&params), (0.2, 0.5)).unwrap())
    });
}

criterion_group!(benches, clearing, period, meanfield);
criterion_main!(benches);
