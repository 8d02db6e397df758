//! Sequential vs data-parallel engine.
//!
//! Each workload runs inside a one-thread rayon pool and inside the default
//! pool. Building with `--no-default-features` removes rayon from the engine
//! altogether; the numbers then match the one-thread case.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use posgap::decomposition::{decompose_by_subgroup, SubgroupReference};
use posgap::indicator::normalize_weights;
use posgap::measures::adjusted_index;
use posgap::{build_profile, Dataset, IndicatorSpec, ReferenceDistribution, ReferenceMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(n: usize, d: usize) -> (Dataset, Vec<IndicatorSpec>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut specs: Vec<IndicatorSpec> = (0..d)
        .map(|j| IndicatorSpec::ordinal_scale(format!("i{j}"), 6, 3, 1.0).unwrap())
        .collect();
    normalize_weights(&mut specs);
    let values = (0..n * d).map(|_| rng.gen_range(0..6) as f64).collect();
    let weights = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let groups = (0..n).map(|i| format!("g{}", i % 8)).collect();
    let data = Dataset::new(n, d, values, Some(weights)).unwrap().with_subgroups(groups).unwrap();
    (data, specs)
}

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("1-thread", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("default", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn engine(c: &mut Criterion) {
    let (data, specs) = problem(200_000, 6);
    let reference = ReferenceDistribution::fit_unstamped(&data, &specs, ReferenceMode::InSample).unwrap();
    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("fit_reference", name), |b| {
            b.iter(|| pool.install(|| ReferenceDistribution::fit_unstamped(black_box(&data), &specs, ReferenceMode::InSample).unwrap()))
        });
        group.bench_function(BenchmarkId::new("profile_and_index", name), |b| {
            b.iter(|| {
                pool.install(|| {
                    let prof = build_profile(black_box(&data), &specs, &reference, 0.5).unwrap();
                    adjusted_index(&prof, 2.0).unwrap().p
                })
            })
        });
        group.bench_function(BenchmarkId::new("decompose_8_groups", name), |b| {
            b.iter(|| {
                pool.install(|| {
                    decompose_by_subgroup(black_box(&data), &specs, SubgroupReference::Shared(&reference), 0.5, 1.0)
                        .unwrap()
                        .residual
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, engine);
criterion_main!(benches);
