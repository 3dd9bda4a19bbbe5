use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dispo_core::construction::fs_stream;
use dispo_core::dfao::{eval_dfao, vtm_dfao};
use dispo_core::disposability::disposable_positions;
use dispo_core::engine::{PredicateEnv, DISPO_POS_COMMAND};
use dispo_core::morphism::vtm_stream;
use dispo_core::word::{find_square, find_square_parallel};

fn square_scan(c: &mut Criterion) {
    let prefix = vtm_stream().prefix(1 << 14).unwrap().into_letters();
    let mut group = c.benchmark_group("square_scan");
    for max_half in [64usize, 1024] {
        group.bench_with_input(
            BenchmarkId::new("serial", max_half),
            &max_half,
            |b, &h| b.iter(|| find_square(black_box(&prefix), h)),
        );
        group.bench_with_input(
            BenchmarkId::new("parallel", max_half),
            &max_half,
            |b, &h| b.iter(|| find_square_parallel(black_box(&prefix), h)),
        );
    }
    group.finish();
}

fn dfao_eval(c: &mut Criterion) {
    let d = vtm_dfao();
    c.bench_function("dfao_eval_64k", |b| {
        b.iter(|| {
            let mut acc = 0u64;
            for n in 0..(1 << 16) {
                acc += eval_dfao(black_box(&d), n) as u64;
            }
            acc
        })
    });
}

fn engine_compile(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    group.sample_size(20);
    group.bench_function("compile_dispo_pos", |b| {
        b.iter(|| {
            let mut env = PredicateEnv::standard();
            env.run_command(black_box(DISPO_POS_COMMAND)).unwrap();
        })
    });
    group.finish();
}

fn disposability_scan(c: &mut Criterion) {
    let w = vtm_stream();
    let mut group = c.benchmark_group("disposability");
    group.sample_size(20);
    group.bench_function("scan_1024_bound_64", |b| {
        b.iter(|| disposable_positions(black_box(&w), 1024, 64).unwrap())
    });
    group.finish();
}

fn fs_generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("fs");
    group.sample_size(20);
    group.bench_function("generate_16k", |b| {
        b.iter(|| fs_stream().prefix(1 << 14).unwrap().into_letters())
    });
    group.finish();
}

criterion_group!(
    benches,
    square_scan,
    dfao_eval,
    engine_compile,
    disposability_scan,
    fs_generation
);
criterion_main!(benches);
