use cobsim::batch::{run_batch_sequential, with_seeds};
use cobsim::engine::RunOptions;
use cobsim::presets::preset;
use cobsim::Span;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn batch(c: &mut Criterion) {
    let mut base = preset("balanced").unwrap();
    base.horizon = Span::Events(50_000);
    base.warmup = Span::Events(5_000);
    let opts = RunOptions { record_events: false, record_profiles: false };
    let mut group = c.benchmark_group("batch");
    group.sample_size(10);
    for seeds in [1u64, 4, 8] {
        let configs = with_seeds(&base, 0..seeds);
        group.bench_with_input(BenchmarkId::new("sequential", seeds), &configs, |b, cs| {
            b.iter(|| run_batch_sequential(cs, opts))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", seeds), &configs, |b, cs| {
            b.iter(|| cobsim::batch::run_batch_parallel(cs, opts))
        });
    }
    group.finish();
}

fn single_run(c: &mut Criterion) {
    let mut cfg = preset("high_market").unwrap();
    cfg.horizon = Span::Events(100_000);
    cfg.warmup = Span::Events(10_000);
    let opts = RunOptions { record_events: false, record_profiles: false };
    c.bench_function("run_100k_events", |b| b.iter(|| cobsim::run_with(&cfg, opts).unwrap()));
}

criterion_group!(benches, batch, single_run);
criterion_main!(benches);
