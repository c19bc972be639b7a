use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use krlf_core::batch;
use krlf_core::bytecode;
use krlf_core::corpus;
use krlf_core::engine::RunOptions;
use krlf_core::fuzz;
use krlf_core::semantics::check_source;
use krlf_core::tree;

/// The compute benchmark cut down to 600 outer iterations so each sample
/// stays in the low milliseconds.
fn small_compute() -> String {
    let src = std::fs::read_to_string(corpus::compute_path()).expect("compute benchmark present");
    assert!(src.contains("TO 60000"), "compute benchmark changed shape");
    src.replace("TO 60000", "TO 600")
}

fn engines(c: &mut Criterion) {
    let prog = check_source(&small_compute()).expect("compute benchmark checks");
    let loaded = bytecode::load(&prog);
    let opts = RunOptions::default();
    let mut g = c.benchmark_group("compute");
    g.bench_function("tree", |b| b.iter(|| black_box(tree::run(&prog, &opts).unwrap())));
    g.bench_function("vm", |b| b.iter(|| black_box(bytecode::run(&loaded, &opts).unwrap())));
    g.finish();
}

fn sweeps(c: &mut Criterion) {
    let seeds: Vec<u64> = (0..64).collect();
    let mut g = c.benchmark_group("differential_sweep");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| black_box(batch::map(&seeds, |&s| fuzz::differential(s)))));
    g.bench_function("sequential", |b| {
        b.iter(|| black_box(batch::map_sequential(&seeds, |&s| fuzz::differential(s))))
    });
    g.finish();
}

criterion_group!(benches, engines, sweeps);
criterion_main!(benches);
