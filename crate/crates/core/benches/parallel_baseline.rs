//! Criterion benches for the data-parallel hot paths. Run twice to compare
//! the rayon backend against the sequential fallback:
//!
//! ```text
//! cargo bench -p pathgibbs                          # parallel (default)
//! cargo bench -p pathgibbs --no-default-features    # sequential fallback
//! ```

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pathgibbs::gibbs::{GibbsChain, GibbsConfig, McmcParams, StartMode};
use pathgibbs::interactions::KernelConfig;
use pathgibbs::paths::{hamiltonian, DiscretePath, PathGrid};
use pathgibbs::transfer::{build_operator, sample_block_measure, BlockSampling};

fn bench_hamiltonian(c: &mut Criterion) {
    let kernel = KernelConfig::preset("mollifier_product", 1.0).build().unwrap();
    let mut group = c.benchmark_group("hamiltonian");
    for n_steps in [256usize, 1024] {
        let grid = PathGrid::new(n_steps, 1.0 / 16.0, 3);
        let path = DiscretePath::sample(grid, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n_steps), &path, |b, p| {
            b.iter(|| hamiltonian(p, &kernel).unwrap())
        });
    }
    group.finish();
}

fn bench_operator_assembly(c: &mut Criterion) {
    let kernel = KernelConfig::preset("mollifier_product", 1.0).build().unwrap();
    let mut group = c.benchmark_group("operator_assembly");
    group.sample_size(10);
    for n_blocks in [128usize, 256] {
        let ens = sample_block_measure(
            &kernel,
            1.0,
            1.0 / 16.0,
            n_blocks,
            11,
            BlockSampling::PriorImportance,
        )
        .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n_blocks), &ens, |b, e| {
            b.iter(|| build_operator(e, &kernel).unwrap())
        });
    }
    group.finish();
}

fn bench_path_ensemble(c: &mut Criterion) {
    let grid = PathGrid::new(512, 1.0 / 16.0, 3);
    c.bench_function("sample_512_paths", |b| {
        b.iter(|| {
            pathgibbs::par::map_indexed(512, |i| {
                DiscretePath::sample(grid, pathgibbs::replica_seed(3, i as u64)).endpoint()[0]
            })
        })
    });
}

fn bench_mcmc_sweeps(c: &mut Criterion) {
    let kernel = KernelConfig::preset("mollifier_product", 1.0).build().unwrap();
    let cfg = GibbsConfig {
        kernel,
        grid: PathGrid::new(256, 1.0 / 16.0, 3),
        mcmc: McmcParams {
            block_len: 8,
            proposals_per_sweep: 32,
            sweeps: 10,
            burn_in: 1,
            thinning: 1,
        },
        seed: 5,
    };
    c.bench_function("mcmc_sweep_t16", |b| {
        let mut chain = GibbsChain::new(&cfg, StartMode::Prior).unwrap();
        b.iter(|| chain.sweep())
    });
}

criterion_group!(
    benches,
    bench_hamiltonian,
    bench_operator_assembly,
    bench_path_ensemble,
    bench_mcmc_sweeps
);
criterion_main!(benches);
