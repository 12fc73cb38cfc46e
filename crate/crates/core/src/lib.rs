//! Statistical finite element laboratory.
//!
//! Builds Gaussian-process priors over solutions of stochastically forced
//! elliptic boundary value problems by pushing the forcing process through a
//! P1 finite element solve, conditions those priors on pointwise sensor
//! observations, and measures the discretisation-induced Wasserstein-2 error
//! between finite element and reference distributions across mesh ladders.
//!
//! The crate is organised around the pipeline of a convergence experiment:
//!
//! * [`mesh`] / [`fem`]: uniform simplicial meshes of `[0,1]` and `[0,1]²`
//!   and the P1 operators (stiffness, mass, load, point evaluation) on them.
//! * [`forcing`]: the Gaussian-process forcing model (squared-exponential
//!   kernel).
//! * [`prior`] / [`exact`]: the finite element prior over solutions and the
//!   closed-form Green's-function reference available in 1D.
//! * [`posterior`]: synthetic sensor data and Gaussian conditioning.
//! * [`metrics`] / [`sampling`]: Wasserstein-2 distances between Gaussian
//!   fields, univariate Gaussians and 1D empirical samples; seeded
//!   trajectory sampling for nonlinear functionals of the solution.
//! * [`rates`] / [`experiment`]: convergence-rate estimation and the
//!   end-to-end experiment runner behind the `statfem-lab` CLI.

use blas_src as _;

pub mod error;
pub mod exact;
pub mod experiment;
pub mod fem;
pub mod field;
pub mod forcing;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod posterior;
pub mod prior;
pub mod quadrature;
pub mod rates;
pub mod sampling;

pub use error::{Error, Result};
pub use exact::{greens_eval, ExactPrior1d};
pub use experiment::{
    execute, run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport, HLadder,
};
pub use fem::{basis_eval_matrix, FemSystem, InterpolationMatrix};
pub use field::{GaussianField, GaussianSource, Grid, Point, UnivariateGaussian};
pub use forcing::ForcingModel;
pub use mesh::{build_interval_mesh, build_unit_square_mesh, Mesh};
pub use metrics::{
    sym_psd_sqrt, wasserstein2_empirical_1d, wasserstein2_gaussian_fields,
    wasserstein2_univariate_gaussian,
};
pub use posterior::{
    condition, condition_from_source, generate_sensor_data, posterior_field_on_grid,
    pushforward_linear_functional, SensorSet, SourceOnGrid,
};
pub use prior::{
    assemble_forcing_covariance, statfem_prior_on_grid, ForcingCovariance, KfMode, StatFemPrior,
};
pub use rates::{dyadic_log_ratio, fit_loglog_slope, smooth_lr, RateReport};
pub use sampling::{max_functional, sample_field, SampleBatch};
