use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use dimlab_bench::{markov_source, quantized_codes, solver_problem, SEED};
use dimlab_core::{blahut_arimoto, count_code_blocks, sample_path, BaOptions};
use std::hint::black_box;

fn ba_iterations(c: &mut Criterion) {
    let mut group = c.benchmark_group("ba_10_iterations");
    group.sample_size(10);
    let opts = BaOptions {
        tol: 0.0,
        max_iter: 10,
        trace: false,
    };
    for (m, n_cells) in [(1, 512), (2, 64), (2, 256)] {
        let (block, table) = solver_problem(m, n_cells);
        group.throughput(Throughput::Elements(block.states() as u64));
        group.bench_function(BenchmarkId::new(format!("m{m}"), n_cells), |b| {
            b.iter(|| blahut_arimoto(&block, &table, black_box(-100.0), &opts, None).unwrap())
        });
    }
    group.finish();
}

fn block_counting(c: &mut Criterion) {
    let codes = quantized_codes(1_000_000, 8);
    let mut group = c.benchmark_group("count_blocks");
    group.sample_size(10);
    group.throughput(Throughput::Elements(codes.len() as u64));
    for k in [1, 2, 3] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| count_code_blocks(black_box(&codes), k).unwrap())
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let spec = markov_source();
    let mut group = c.benchmark_group("sample_path");
    group.throughput(Throughput::Elements(100_000));
    group.bench_function("markov_1e5", |b| {
        b.iter(|| sample_path(&spec, 100_000, black_box(SEED)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, ba_iterations, block_counting, sampling);
criterion_main!(benches);
