//! Cross-module consistency checks that exercise the seams between the
//! reference prior, the finite element pipeline and the metric layer.

use statfem_core::field::GaussianSource;
use statfem_core::prior::KfMode;
use statfem_core::*;

/// The FEM prior mean converges to the Green's-function mean at second
/// order in h.
#[test]
fn fem_mean_approaches_exact_mean_quadratically() {
    let model = ForcingModel::new(0.1, 0.4);
    let grid = Grid::uniform_1d(33).unwrap();
    let exact_mean = ExactPrior1d::new(model.clone())
        .mean_at(grid.points())
        .unwrap();
    let mut errs = Vec::new();
    for n in [12usize, 24, 48] {
        let fem = FemSystem::poisson(build_interval_mesh(n).unwrap()).unwrap();
        let kf = assemble_forcing_covariance(&fem, &model, KfMode::NodalMass).unwrap();
        let field = statfem_prior_on_grid(&fem, &kf, &model, &grid).unwrap();
        let err: f64 = exact_mean
            .iter()
            .zip(field.mean.iter())
            .zip(grid.weights())
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        errs.push(err);
    }
    // halving h quarters the error
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!(
            (3.0..5.5).contains(&ratio),
            "errors {errs:?} do not decay quadratically"
        );
    }
}

/// Doubling the reference-grid resolution moves the measured prior distance
/// by less than 2%: the grid quadrature has converged.
#[test]
fn wasserstein_stable_under_grid_refinement() {
    let model = ForcingModel::new(0.1, 0.4);
    let exact = ExactPrior1d::new(model.clone());
    let fem = FemSystem::poisson(build_interval_mesh(12).unwrap()).unwrap();
    let kf = assemble_forcing_covariance(&fem, &model, KfMode::NodalMass).unwrap();
    let mut values = Vec::new();
    for n_grid in [51usize, 101] {
        let grid = Grid::uniform_1d(n_grid).unwrap();
        let exact_field = exact.field_on_grid(&grid).unwrap();
        let statfem_field = statfem_prior_on_grid(&fem, &kf, &model, &grid).unwrap();
        values.push(wasserstein2_gaussian_fields(&exact_field, &statfem_field).unwrap());
    }
    let rel = (values[0] - values[1]).abs() / values[1];
    assert!(
        rel < 0.02,
        "grid refinement changed W by {rel:.4}: {values:?}"
    );
}

/// The pushforward of posterior fields under a fixed linear functional
/// converges at the quadratic rate of the posterior theory.
#[test]
fn linear_functional_pushforward_rate() {
    let model = ForcingModel::new(0.1, 0.4);
    let grid = Grid::uniform_1d(41).unwrap();
    let exact = ExactPrior1d::new(model.clone());
    let sensors0 = SensorSet::equispaced_1d(10, 0.01, 0.99, 1e-3).unwrap();
    let exact_on = SourceOnGrid::evaluate(&exact, &grid, &sensors0.locations).unwrap();
    let values = exact_on.generate_values(&sensors0, 99).unwrap();
    let sensors = sensors0.with_values(values).unwrap();
    let exact_post = exact_on.condition(&sensors).unwrap();

    // mean-value functional: quadrature weights as coefficients
    let weights = ndarray::Array1::from_iter(grid.weights().iter().copied());
    let exact_push = pushforward_linear_functional(&exact_post, &weights).unwrap();

    let mut hs = Vec::new();
    let mut ws = Vec::new();
    for n in [6usize, 9, 13, 19, 28, 42] {
        let fem = FemSystem::poisson(build_interval_mesh(n).unwrap()).unwrap();
        let kf = assemble_forcing_covariance(&fem, &model, KfMode::NodalMass).unwrap();
        let prior = StatFemPrior::new(&fem, &kf, &model).unwrap();
        let post = SourceOnGrid::evaluate(&prior, &grid, &sensors.locations)
            .unwrap()
            .condition(&sensors)
            .unwrap();
        let push = pushforward_linear_functional(&post, &weights).unwrap();
        hs.push(1.0 / n as f64);
        ws.push(wasserstein2_univariate_gaussian(exact_push, push).unwrap());
    }
    let (slope, _) = fit_loglog_slope(&hs, &ws).unwrap();
    assert!((1.7..=2.4).contains(&slope), "pushforward slope {slope}");
}

/// Conditioning through the one-pass evaluation and through the standalone
/// source-backed path produce the same posterior.
#[test]
fn posterior_paths_agree() {
    let model = ForcingModel::new(0.1, 0.4);
    let grid = Grid::uniform_1d(21).unwrap();
    let fem = FemSystem::poisson(build_interval_mesh(10).unwrap()).unwrap();
    let kf = assemble_forcing_covariance(&fem, &model, KfMode::NodalMass).unwrap();
    let prior_src = StatFemPrior::new(&fem, &kf, &model).unwrap();
    let sensors = SensorSet::equispaced_1d(5, 0.05, 0.95, 1e-2)
        .unwrap()
        .with_values(ndarray::array![0.1, 0.12, 0.13, 0.12, 0.1])
        .unwrap();
    let via_one_pass = posterior_field_on_grid(&prior_src, &grid, &sensors).unwrap();
    let prior_field = prior_src.field_on_grid(&grid).unwrap();
    let via_source = condition_from_source(&prior_field, &prior_src, &sensors).unwrap();
    for (a, b) in via_one_pass.mean.iter().zip(via_source.mean.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in via_one_pass.cov.iter().zip(via_source.cov.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}
