use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use solab::{modular_from_spec, run_so_with, Engine, ModularSpec, RngStream, SoConfig};

fn engines(c: &mut Criterion) {
    let mut group = c.benchmark_group("so_three_stage");
    group.sample_size(10);
    for n in [50usize, 100] {
        let w0 = modular_from_spec(&ModularSpec { n, k: 5, p: 0.1, seed: 1 }).unwrap();
        let config = SoConfig::three_stage(1e-6, 10 * n, 20);
        for (name, engine) in [("fast", Engine::Fast), ("reference", Engine::Reference)] {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| run_so_with(&w0, &config, 3, engine, |s| RngStream::derive(3, 0, 0, s.code())).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, engines);
criterion_main!(benches);
