use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use srmq_bench::{random_array, random_windows};
use srmq_core::{OneBitRmq, SparseTable, TradeoffRmq};

fn queries(c: &mut Criterion) {
    let mut g = c.benchmark_group("query");
    for n in [1usize << 10, 1 << 12] {
        let a = random_array(n, 1);
        let w = random_windows(n, 256, 1);
        let onebit = OneBitRmq::build(&a).unwrap();
        g.bench_with_input(BenchmarkId::new("onebit", n), &w, |b, w| {
            b.iter(|| {
                w.iter()
                    .map(|&(x, y)| onebit.query(x, y).unwrap())
                    .sum::<usize>()
            })
        });
        for t in 1..=3 {
            let ds = TradeoffRmq::build(&a, t).unwrap();
            g.bench_with_input(BenchmarkId::new(format!("tradeoff_t{t}"), n), &w, |b, w| {
                b.iter(|| {
                    w.iter()
                        .map(|&(x, y)| ds.query(x, y).unwrap())
                        .sum::<usize>()
                })
            });
        }
        let st = SparseTable::build(&a);
        g.bench_with_input(BenchmarkId::new("sparse", n), &w, |b, w| {
            b.iter(|| {
                w.iter()
                    .map(|&(x, y)| st.query(x, y).unwrap())
                    .sum::<usize>()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, queries);
criterion_main!(benches);
