use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use srmq_bench::random_array;
use srmq_core::{OneBitRmq, SparseTable, TradeoffRmq};

fn build(c: &mut Criterion) {
    let mut g = c.benchmark_group("build");
    g.sample_size(10);
    for n in [1usize << 10, 1 << 12] {
        let a = random_array(n, 2);
        g.bench_with_input(BenchmarkId::new("onebit", n), &a, |b, a| {
            b.iter(|| OneBitRmq::build(a).unwrap())
        });
        for t in [1usize, 3] {
            g.bench_with_input(BenchmarkId::new(format!("tradeoff_t{t}"), n), &a, |b, a| {
                b.iter(|| TradeoffRmq::build(a, t).unwrap())
            });
        }
        g.bench_with_input(BenchmarkId::new("sparse", n), &a, |b, a| {
            b.iter(|| SparseTable::build(a))
        });
    }
    g.finish();
}

criterion_group!(benches, build);
criterion_main!(benches);
