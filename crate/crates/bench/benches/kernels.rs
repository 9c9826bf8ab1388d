use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use valleyscan::mc::metropolis_sweep;
use valleyscan::oracle::enumerate_landscape;
use valleyscan::valley::estimate_escape_rate;
use valleyscan::{descend_zero_t, IsingModel, RandomSource, SpinConfiguration};

fn model(n: usize) -> IsingModel {
    IsingModel::random_dyadic(n, 0.5, &mut RandomSource::new(1, 0).rng())
}

fn energy(c: &mut Criterion) {
    let m = model(64);
    let s = SpinConfiguration::random(64, &mut RandomSource::from_seed(2).rng());
    c.bench_function("energy n=64", |b| b.iter(|| m.energy(black_box(&s)).unwrap()));
    c.bench_function("delta_energy n=64", |b| b.iter(|| m.delta_energy(black_box(&s), 17).unwrap()));
}

fn sweep(c: &mut Criterion) {
    let m = model(64);
    let mut rng = RandomSource::from_seed(3).rng();
    let mut s = SpinConfiguration::random(64, &mut rng);
    c.bench_function("metropolis_sweep n=64", |b| {
        b.iter(|| metropolis_sweep(&m, &mut s, black_box(1.0), &mut rng))
    });
}

fn descent(c: &mut Criterion) {
    let m = model(64);
    let mut rng = RandomSource::from_seed(4).rng();
    c.bench_function("descend_zero_t n=64", |b| {
        b.iter_batched(
            || SpinConfiguration::random(64, &mut rng),
            |s| descend_zero_t(&m, &s),
            BatchSize::SmallInput,
        )
    });
}

fn escape(c: &mut Criterion) {
    let m = model(12);
    let lm = descend_zero_t(&m, &SpinConfiguration::all_up(12));
    let source = RandomSource::from_seed(5);
    c.bench_function("estimate_escape_rate n=12, 32 chains", |b| {
        b.iter(|| estimate_escape_rate(&m, &lm, 1.0, 32, 100_000, &source).unwrap())
    });
}

fn enumerate(c: &mut Criterion) {
    let m = model(14);
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("enumerate_landscape n=14", |b| b.iter(|| enumerate_landscape(&m).unwrap()));
    group.finish();
}

criterion_group!(kernels, energy, sweep, descent, escape, enumerate);
criterion_main!(kernels);
