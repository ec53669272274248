use criterion::{criterion_group, criterion_main, Criterion};
use twotier::delivery::{deliver_sc, deliver_scheme_b};
use twotier::placement::place;
use twotier_bench::simulation_fixture;

fn delivery(c: &mut Criterion) {
    let (cfg, sim) = simulation_fixture(100_000, 7);
    let alloc = place(&cfg, &sim).unwrap();
    let mut g = c.benchmark_group("delivery_100k");
    g.sample_size(10);
    g.bench_function("place", |b| b.iter(|| place(&cfg, &sim).unwrap()));
    g.bench_function("sc", |b| b.iter(|| deliver_sc(&cfg, &sim, &alloc).unwrap()));
    g.bench_function("scheme_b", |b| b.iter(|| deliver_scheme_b(&cfg, &sim, &alloc).unwrap()));
    g.finish();
}

criterion_group!(benches, delivery);
criterion_main!(benches);
