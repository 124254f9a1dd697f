use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use wavefront_core::cbm::{Increment, ParticleSystem};
use wavefront_core::stats::{q_grid, q_mc};
use wavefront_core::{SeedTree, Simulation, SpacingDistribution, StoppingRule, Stream};

fn uniform() -> SpacingDistribution {
    SpacingDistribution::uniform(0.5, 1.5).unwrap()
}

fn queue_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("queue");
    const STEPS: u64 = 10_000;
    g.throughput(Throughput::Elements(STEPS));
    for rule in [StoppingRule::OwnPosition, StoppingRule::PredecessorPosition] {
        // Warm past the transient so the tail is materialised and waves are typical.
        let mut warm = Simulation::seeded(uniform(), &SeedTree::new(1), 0).with_rule(rule);
        warm.run_collect(50_000);
        g.bench_function(format!("steps_{rule:?}"), |b| {
            b.iter_batched(
                || warm.clone(),
                |mut sim| {
                    for _ in 0..STEPS {
                        black_box(sim.step());
                    }
                },
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn walk_maxima(c: &mut Criterion) {
    let d = uniform();
    let mut g = c.benchmark_group("walk");
    g.throughput(Throughput::Elements(10_000));
    g.bench_function("q_mc_256_2", |b| {
        let mut rng = SeedTree::new(2).rng(Stream::Walk, 0);
        b.iter(|| black_box(q_mc(256, 2.0, &d, 10_000, &mut rng)))
    });
    g.bench_function("q_grid_3x3", |b| {
        let mut rng = SeedTree::new(3).rng(Stream::Walk, 0);
        b.iter(|| black_box(q_grid(&[64, 256, 1024], &[1.0, 2.0, 4.0], &d, 10_000, &mut rng)))
    });
    g.finish();
}

fn particles(c: &mut Criterion) {
    let mut g = c.benchmark_group("cbm");
    g.sample_size(20);
    let fresh = || ParticleSystem::grid(0.0, 48.0, 0.05, 1e-4, Increment::Gaussian);
    g.throughput(Throughput::Elements(fresh().cluster_count() as u64));
    g.bench_function("first_step_961", |b| {
        let mut rng = SeedTree::new(4).rng(Stream::Particles, 0);
        b.iter_batched(fresh, |mut s| s.step(&mut rng), BatchSize::SmallInput)
    });
    g.bench_function("evolve_to_0.1", |b| {
        let mut rng = SeedTree::new(5).rng(Stream::Particles, 0);
        b.iter_batched(fresh, |mut s| s.evolve(0.1, &mut rng).unwrap(), BatchSize::SmallInput)
    });
    g.finish();
}

criterion_group!(benches, queue_steps, walk_maxima, particles);
criterion_main!(benches);
