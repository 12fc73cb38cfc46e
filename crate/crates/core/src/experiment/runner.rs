//! End-to-end experiment pipelines.
//!
//! Each experiment builds a ladder of meshes, constructs the finite element
//! prior (and optionally conditions it on one shared sensor draw), measures
//! Wasserstein-2 distances against the reference (the Green's-function
//! prior in 1D, the next-finer levels in 2D) and estimates the convergence
//! rate. Everything is deterministic given the config seed.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exact::ExactPrior1d;
use crate::fem::FemSystem;
use crate::field::{GaussianField, GaussianSource, Grid};
use crate::forcing::ForcingModel;
use crate::mesh::{build_interval_mesh, build_unit_square_mesh, Mesh};
use crate::metrics::{wasserstein2_empirical_1d, wasserstein2_prepared, PreparedField};
use crate::posterior::{SensorSet, SourceOnGrid};
use crate::prior::{assemble_forcing_covariance, statfem_prior_on_grid, StatFemPrior};
use crate::rates::{dyadic_log_ratio, fit_loglog_slope, smooth_lr, RateReport};
use crate::sampling::{max_functional, sample_field};

use super::config::{ExperimentConfig, ExperimentKind, HLadder};
use super::output::emit_csv;

/// Smoothing cutoff for dyadic log-ratios: entries with h above this are
/// discarded before the cumulative average.
pub const LR_SMOOTHING_CUTOFF: f64 = 0.15;

/// One measured distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub epsilon: Option<f64>,
    pub h: f64,
    pub wasserstein: f64,
}

/// Rate estimates for one noise level (epsilon is None for prior
/// experiments).
#[derive(Debug, Clone)]
pub struct EpsilonReport {
    pub epsilon: Option<f64>,
    pub report: RateReport,
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub distances: Vec<DistanceRow>,
    pub rates: Vec<EpsilonReport>,
}

/// Run an experiment and write distances.csv, rates.csv and the run
/// manifest into the configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = execute(config)?;
    emit_csv(&report, &config.output_dir)?;
    Ok(report)
}

/// Run an experiment without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let (distances, rates) = match config.experiment {
        ExperimentKind::Prior1d => run_prior_1d(config)?,
        ExperimentKind::Posterior1d => run_posterior_1d(config)?,
        ExperimentKind::Prior2d | ExperimentKind::Posterior2d => run_self_convergence_2d(config)?,
        ExperimentKind::MaxPrior1d => run_max_prior_1d(config)?,
        ExperimentKind::MaxPosterior1d => run_max_posterior_1d(config)?,
    };
    Ok(ExperimentReport {
        config: config.clone(),
        distances,
        rates,
    })
}

type Pipeline = (Vec<DistanceRow>, Vec<EpsilonReport>);

fn build_mesh(dim: usize, n: usize) -> Result<Mesh> {
    if dim == 2 {
        build_unit_square_mesh(n)
    } else {
        build_interval_mesh(n)
    }
}

/// The statFEM prior field of one ladder level on the reference grid.
fn level_prior_field(
    config: &ExperimentConfig,
    model: &ForcingModel,
    n: usize,
    grid: &Grid,
) -> Result<GaussianField> {
    let mesh = build_mesh(config.experiment.dim(), n)?;
    let fem = FemSystem::poisson(mesh)?;
    let kf = assemble_forcing_covariance(&fem, model, config.kf_mode)?;
    statfem_prior_on_grid(&fem, &kf, model, grid)
}

/// Same, but jointly evaluated on the grid and the sensor locations.
fn level_source_on_grid(
    config: &ExperimentConfig,
    model: &ForcingModel,
    n: usize,
    grid: &Grid,
    locations: &[crate::field::Point],
) -> Result<SourceOnGrid> {
    let mesh = build_mesh(config.experiment.dim(), n)?;
    let fem = FemSystem::poisson(mesh)?;
    let kf = assemble_forcing_covariance(&fem, model, config.kf_mode)?;
    let prior = StatFemPrior::new(&fem, &kf, model)?;
    SourceOnGrid::evaluate(&prior, grid, locations)
}

fn reference_grid(config: &ExperimentConfig) -> Result<Grid> {
    if config.experiment.dim() == 2 {
        Grid::tensor_2d(config.grid_n)
    } else {
        Grid::uniform_1d(config.grid_n)
    }
}

fn sensor_set(config: &ExperimentConfig, epsilon: f64) -> Result<SensorSet> {
    if config.experiment.dim() == 2 {
        let side = (config.sensor_count as f64).sqrt().round() as usize;
        SensorSet::tensor_2d(side, config.sensor_lo, config.sensor_hi, epsilon)
    } else {
        SensorSet::equispaced_1d(
            config.sensor_count,
            config.sensor_lo,
            config.sensor_hi,
            epsilon,
        )
    }
}

/// Observation seeds per noise level: one fixed stride away from the run
/// seed so sensor draws never collide with trajectory streams.
fn data_seed(base: u64, eps_index: usize) -> u64 {
    base.wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(eps_index as u64 + 1))
}

/// Trajectory-batch seeds: the reference batch and every ladder level draw
/// independently, as the Monte Carlo estimate of the maximum distribution
/// distance requires (coupled draws would cancel the sampling noise that
/// genuinely limits the nonlinear functional's convergence).
fn batch_seed(base: u64, tag: u64) -> u64 {
    base.wrapping_add(0x517C_C1B7_2722_0A95_u64.wrapping_mul(tag + 1))
}

fn slope_report(hs: &[f64], ws: &[f64]) -> Result<RateReport> {
    let (slope, intercept) = fit_loglog_slope(hs, ws)?;
    Ok(RateReport {
        h_values: hs.to_vec(),
        distances: ws.to_vec(),
        slope,
        intercept,
        lr_sequence: None,
        smoothed_lr: None,
    })
}

/// 1D prior: W2 between the Green's-function prior and the statFEM prior
/// across the ladder, slope from the log-log fit.
fn run_prior_1d(config: &ExperimentConfig) -> Result<Pipeline> {
    let model = ForcingModel::new(config.sigma_f, config.l_f);
    let grid = reference_grid(config)?;
    let exact = ExactPrior1d::new(model.clone());
    let exact_prep = PreparedField::new(&exact.field_on_grid(&grid)?)?;
    let mut rows = Vec::new();
    for &n in &config.levels()? {
        let h = config.h_of_level(n);
        let w = (|| -> Result<f64> {
            let field = level_prior_field(config, &model, n, &grid)?;
            wasserstein2_prepared(&exact_prep, &PreparedField::new(&field)?)
        })()
        .map_err(|e| e.at_level(h, None))?;
        rows.push(DistanceRow {
            epsilon: None,
            h,
            wasserstein: w,
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ws: Vec<f64> = rows.iter().map(|r| r.wasserstein).collect();
    let report = slope_report(&hs, &ws)?;
    Ok((
        rows,
        vec![EpsilonReport {
            epsilon: None,
            report,
        }],
    ))
}

/// 1D posterior: condition both priors on one shared sensor draw per noise
/// level and compare the posteriors across the ladder.
fn run_posterior_1d(config: &ExperimentConfig) -> Result<Pipeline> {
    let model = ForcingModel::new(config.sigma_f, config.l_f);
    let grid = reference_grid(config)?;
    let exact = ExactPrior1d::new(model.clone());
    let locations = sensor_set(config, 1.0)?.locations;
    let exact_on = SourceOnGrid::evaluate(&exact, &grid, &locations)?;

    // one sensor draw per noise level, reused across all h
    let mut per_eps = Vec::new();
    for (i, &eps) in config.epsilons.iter().enumerate() {
        let sensors = sensor_set(config, eps)?;
        let values = exact_on.generate_values(&sensors, data_seed(config.seed, i))?;
        let sensors = sensors.with_values(values)?;
        let exact_post = exact_on.condition(&sensors)?;
        per_eps.push((eps, sensors, PreparedField::new(&exact_post)?));
    }

    let mut rows = Vec::new();
    let mut dists: Vec<Vec<f64>> = vec![Vec::new(); per_eps.len()];
    let mut hs = Vec::new();
    for &n in &config.levels()? {
        let h = config.h_of_level(n);
        hs.push(h);
        let statfem_on = level_source_on_grid(config, &model, n, &grid, &locations)
            .map_err(|e| e.at_level(h, None))?;
        for (k, (eps, sensors, exact_prep)) in per_eps.iter().enumerate() {
            let w = (|| -> Result<f64> {
                let post = statfem_on.condition(sensors)?;
                wasserstein2_prepared(exact_prep, &PreparedField::new(&post)?)
            })()
            .map_err(|e| e.at_level(h, Some(*eps)))?;
            rows.push(DistanceRow {
                epsilon: Some(*eps),
                h,
                wasserstein: w,
            });
            dists[k].push(w);
        }
    }

    let mut rates = Vec::new();
    for ((eps, _, _), ws) in per_eps.iter().zip(dists.iter()) {
        rates.push(EpsilonReport {
            epsilon: Some(*eps),
            report: slope_report(&hs, ws)?,
        });
    }
    Ok((rows, rates))
}

/// 2D prior / posterior: no exact reference, so measure distances between
/// consecutive dyadic levels and estimate the rate from log2 ratios.
fn run_self_convergence_2d(config: &ExperimentConfig) -> Result<Pipeline> {
    let model = ForcingModel::new(config.sigma_f, config.l_f);
    let grid = reference_grid(config)?;
    let levels = config.levels()?;
    let bases = HLadder::log_ratio_bases(&levels);
    if bases.is_empty() {
        return Err(Error::Config(
            "h_ladder: no level has both its half and quarter widths present".into(),
        ));
    }
    // levels that appear on the left of a consecutive-level distance
    let mut pair_lefts: Vec<usize> = bases.iter().flat_map(|&b| [b, 2 * b]).collect();
    pair_lefts.sort_unstable();
    pair_lefts.dedup();

    let posterior_mode = config.experiment.uses_sensors();
    let mut sweeps: Vec<Option<(f64, SensorSet)>> = Vec::new();
    let mut locations = Vec::new();
    if posterior_mode {
        locations = sensor_set(config, 1.0)?.locations;
        // Sensor data comes from the statFEM prior on a fine mesh.
        let n_fine = (1.0 / config.fine_h).round() as usize;
        let fine_mesh = build_unit_square_mesh(n_fine)?;
        let fine_fem = FemSystem::poisson(fine_mesh)?;
        let fine_kf = assemble_forcing_covariance(&fine_fem, &model, config.kf_mode)?;
        let fine_prior = StatFemPrior::new(&fine_fem, &fine_kf, &model)?;
        for (i, &eps) in config.epsilons.iter().enumerate() {
            let sensors = sensor_set(config, eps)?;
            let values = crate::posterior::generate_sensor_data(
                &fine_prior,
                &sensors,
                data_seed(config.seed, i),
            )?;
            sweeps.push(Some((eps, sensors.with_values(values)?)));
        }
    } else {
        sweeps.push(None);
    }

    let mut rows = Vec::new();
    let mut rates = Vec::new();
    for sweep in &sweeps {
        let epsilon = sweep.as_ref().map(|(eps, _)| *eps);
        // distance between level n and level 2n, keyed by n
        let mut pair_dist: BTreeMap<usize, f64> = BTreeMap::new();
        let mut cache: BTreeMap<usize, PreparedField> = BTreeMap::new();
        for &n in &pair_lefts {
            let h = config.h_of_level(n);
            let result = (|| -> Result<f64> {
                for level in [n, 2 * n] {
                    if !cache.contains_key(&level) {
                        let field = match sweep {
                            Some((_, sensors)) => {
                                level_source_on_grid(config, &model, level, &grid, &locations)?
                                    .condition(sensors)?
                            }
                            None => level_prior_field(config, &model, level, &grid)?,
                        };
                        cache.insert(level, PreparedField::new(&field)?);
                    }
                }
                wasserstein2_prepared(&cache[&n], &cache[&(2 * n)])
            })();
            let w = result.map_err(|e| e.at_level(h, epsilon))?;
            // level n is finished: it was the right side of pair n/2 and the
            // left side of this pair
            cache.remove(&n);
            pair_dist.insert(n, w);
            rows.push(DistanceRow {
                epsilon,
                h,
                wasserstein: w,
            });
        }
        drop(cache);

        let hs: Vec<f64> = pair_lefts.iter().map(|&n| config.h_of_level(n)).collect();
        let ws: Vec<f64> = pair_lefts.iter().map(|&n| pair_dist[&n]).collect();
        let mut report = slope_report(&hs, &ws)?;
        let mut lr_seq = Vec::new();
        let mut ratio_hs = Vec::new();
        let mut ratios = Vec::new();
        for &b in &bases {
            let h = config.h_of_level(b);
            let lr = dyadic_log_ratio(pair_dist[&b], pair_dist[&(2 * b)])
                .map_err(|e| e.at_level(h, epsilon))?;
            lr_seq.push((h, lr));
            ratio_hs.push(h);
            ratios.push(pair_dist[&b] / pair_dist[&(2 * b)]);
        }
        // bases ascend, so h descends as smooth_lr expects; coarse ladders
        // may have nothing below the cutoff, leaving only the raw ratios
        report.smoothed_lr = if ratio_hs.iter().any(|&h| h <= LR_SMOOTHING_CUTOFF) {
            Some(smooth_lr(&ratio_hs, &ratios, LR_SMOOTHING_CUTOFF)?)
        } else {
            None
        };
        report.lr_sequence = Some(lr_seq);
        rates.push(EpsilonReport { epsilon, report });
    }
    Ok((rows, rates))
}

/// 1D maximum functional, prior case: empirical W2 between seeded maxima of
/// the reference prior and of the statFEM prior, each batch drawn with its
/// own derived seed.
fn run_max_prior_1d(config: &ExperimentConfig) -> Result<Pipeline> {
    let model = ForcingModel::new(config.sigma_f, config.l_f);
    let grid = reference_grid(config)?;
    let exact = ExactPrior1d::new(model.clone());
    let exact_field = exact.field_on_grid(&grid)?;
    let reference_max = max_functional(&sample_field(&exact_field, config.n_samples, config.seed)?);

    let mut rows = Vec::new();
    for &n in &config.levels()? {
        let h = config.h_of_level(n);
        let w = (|| -> Result<f64> {
            let field = level_prior_field(config, &model, n, &grid)?;
            let batch = sample_field(&field, config.n_samples, batch_seed(config.seed, n as u64))?;
            wasserstein2_empirical_1d(&reference_max, &max_functional(&batch))
        })()
        .map_err(|e| e.at_level(h, None))?;
        rows.push(DistanceRow {
            epsilon: None,
            h,
            wasserstein: w,
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ws: Vec<f64> = rows.iter().map(|r| r.wasserstein).collect();
    let report = slope_report(&hs, &ws)?;
    Ok((
        rows,
        vec![EpsilonReport {
            epsilon: None,
            report,
        }],
    ))
}

/// 1D maximum functional, posterior case: same pipeline after conditioning
/// on a shared sensor draw per noise level.
fn run_max_posterior_1d(config: &ExperimentConfig) -> Result<Pipeline> {
    let model = ForcingModel::new(config.sigma_f, config.l_f);
    let grid = reference_grid(config)?;
    let exact = ExactPrior1d::new(model.clone());
    let locations = sensor_set(config, 1.0)?.locations;
    let exact_on = SourceOnGrid::evaluate(&exact, &grid, &locations)?;

    let mut per_eps = Vec::new();
    for (i, &eps) in config.epsilons.iter().enumerate() {
        let sensors = sensor_set(config, eps)?;
        let values = exact_on.generate_values(&sensors, data_seed(config.seed, i))?;
        let sensors = sensors.with_values(values)?;
        let exact_post = exact_on.condition(&sensors)?;
        let reference_max =
            max_functional(&sample_field(&exact_post, config.n_samples, config.seed)?);
        per_eps.push((eps, sensors, reference_max));
    }

    let mut rows = Vec::new();
    let mut dists: Vec<Vec<f64>> = vec![Vec::new(); per_eps.len()];
    let mut hs = Vec::new();
    for &n in &config.levels()? {
        let h = config.h_of_level(n);
        hs.push(h);
        let statfem_on = level_source_on_grid(config, &model, n, &grid, &locations)
            .map_err(|e| e.at_level(h, None))?;
        for (k, (eps, sensors, reference_max)) in per_eps.iter().enumerate() {
            let w = (|| -> Result<f64> {
                let post = statfem_on.condition(sensors)?;
                let batch =
                    sample_field(&post, config.n_samples, batch_seed(config.seed, n as u64))?;
                wasserstein2_empirical_1d(reference_max, &max_functional(&batch))
            })()
            .map_err(|e| e.at_level(h, Some(*eps)))?;
            rows.push(DistanceRow {
                epsilon: Some(*eps),
                h,
                wasserstein: w,
            });
            dists[k].push(w);
        }
    }

    let mut rates = Vec::new();
    for ((eps, _, _), ws) in per_eps.iter().zip(dists.iter()) {
        rates.push(EpsilonReport {
            epsilon: Some(*eps),
            report: slope_report(&hs, ws)?,
        });
    }
    Ok((rows, rates))
}
