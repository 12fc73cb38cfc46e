//! Benchmarks for the pipeline hot spots: operator assembly, prior
//! construction, conditioning and the Gaussian Wasserstein distance.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use statfem_core::field::GaussianSource;
use statfem_core::metrics::PreparedField;
use statfem_core::prior::KfMode;
use statfem_core::*;

fn bench_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assembly");
    for n in [32usize, 128] {
        group.bench_with_input(BenchmarkId::new("stiffness_1d", n), &n, |b, &n| {
            let mesh = build_interval_mesh(n).unwrap();
            b.iter(|| fem::assemble_stiffness(&mesh, &|_| 1.0).unwrap());
        });
    }
    for n in [8usize, 16] {
        group.bench_with_input(BenchmarkId::new("stiffness_2d", n), &n, |b, &n| {
            let mesh = build_unit_square_mesh(n).unwrap();
            b.iter(|| fem::assemble_stiffness(&mesh, &|_| 1.0).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("forcing_cov_2d", n), &n, |b, &n| {
            let fem = FemSystem::poisson(build_unit_square_mesh(n).unwrap()).unwrap();
            let model = ForcingModel::new(0.1, 0.4);
            b.iter(|| assemble_forcing_covariance(&fem, &model, KfMode::NodalMass).unwrap());
        });
    }
    group.finish();
}

fn bench_prior(c: &mut Criterion) {
    let mut group = c.benchmark_group("prior");
    group.sample_size(20);
    let model = ForcingModel::new(0.1, 0.4);
    for n in [16usize, 64] {
        group.bench_with_input(BenchmarkId::new("statfem_on_grid_1d", n), &n, |b, &n| {
            let fem = FemSystem::poisson(build_interval_mesh(n).unwrap()).unwrap();
            let kf = assemble_forcing_covariance(&fem, &model, KfMode::NodalMass).unwrap();
            let grid = Grid::uniform_1d(51).unwrap();
            b.iter(|| statfem_prior_on_grid(&fem, &kf, &model, &grid).unwrap());
        });
    }
    group.bench_function("statfem_on_grid_2d_n16", |b| {
        let fem = FemSystem::poisson(build_unit_square_mesh(16).unwrap()).unwrap();
        let kf = assemble_forcing_covariance(&fem, &model, KfMode::NodalMass).unwrap();
        let grid = Grid::tensor_2d(21).unwrap();
        b.iter(|| statfem_prior_on_grid(&fem, &kf, &model, &grid).unwrap());
    });
    group.bench_function("exact_prior_grid_51", |b| {
        let exact = ExactPrior1d::new(model.clone());
        let grid = Grid::uniform_1d(51).unwrap();
        b.iter(|| exact.field_on_grid(&grid).unwrap());
    });
    group.finish();
}

fn bench_posterior_and_metrics(c: &mut Criterion) {
    let model = ForcingModel::new(0.1, 0.4);
    let grid = Grid::uniform_1d(41).unwrap();
    let fem = FemSystem::poisson(build_interval_mesh(24).unwrap()).unwrap();
    let kf = assemble_forcing_covariance(&fem, &model, KfMode::NodalMass).unwrap();
    let prior = StatFemPrior::new(&fem, &kf, &model).unwrap();
    let sensors0 = SensorSet::equispaced_1d(10, 0.01, 0.99, 1e-3).unwrap();
    let on_grid = SourceOnGrid::evaluate(&prior, &grid, &sensors0.locations).unwrap();
    let values = on_grid.generate_values(&sensors0, 1).unwrap();
    let sensors = sensors0.with_values(values).unwrap();

    let mut group = c.benchmark_group("posterior");
    group.bench_function("condition_41grid_10sensors", |b| {
        b.iter(|| on_grid.condition(&sensors).unwrap());
    });
    group.finish();

    let post = on_grid.condition(&sensors).unwrap();
    let prior_field = prior.field_on_grid(&grid).unwrap();
    let mut group = c.benchmark_group("metrics");
    group.bench_function("wasserstein2_fields_41", |b| {
        b.iter(|| wasserstein2_gaussian_fields(black_box(&prior_field), black_box(&post)).unwrap());
    });
    group.bench_function("prepared_pairwise_41", |b| {
        let pa = PreparedField::new(&prior_field).unwrap();
        let pb = PreparedField::new(&post).unwrap();
        b.iter(|| statfem_core::metrics::wasserstein2_prepared(&pa, &pb).unwrap());
    });
    group.bench_function("sample_1000_trajectories_41", |b| {
        b.iter(|| sample_field(&post, 1000, 7).unwrap());
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_assembly,
    bench_prior,
    bench_posterior_and_metrics
);
criterion_main!(benches);
