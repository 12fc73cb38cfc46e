//! Seeded sampling of Gaussian fields and Monte Carlo functionals.
//!
//! Trajectories are drawn as mean + F z with F = V √Λ₊ from the clamped
//! eigendecomposition of the covariance (posterior covariances are routinely
//! rank-deficient at the sensors, so a Cholesky factor would fail).
//! Trajectory j uses ChaCha8 stream j of the batch seed, so batches are
//! reproducible and trajectory-parallel generation would not change them.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::GaussianField;
use crate::linalg::{canonicalize_columns, sym_eigh};

/// Seeded trajectories of a field on its grid, one row per trajectory.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub trajectories: Array2<f64>,
    pub seed: u64,
    pub source: String,
}

/// Covariance factor F = V √Λ₊ with eigenvalues below `clamp_rel * λ_max`
/// zeroed and eigenvector signs canonicalized. Errors if the matrix is
/// indefinite beyond clamping tolerance.
pub fn psd_factor(cov: &Array2<f64>, clamp_rel: f64) -> Result<Array2<f64>> {
    let (vals, mut vecs) = sym_eigh(cov)?;
    let lambda_max = vals.iter().cloned().fold(0.0_f64, f64::max);
    if let Some(&min) = vals.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < -1e-8 * lambda_max.max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!(
                "covariance is indefinite: lambda_min = {min:.3e}, lambda_max = {lambda_max:.3e}"
            )));
        }
    }
    canonicalize_columns(&mut vecs);
    let floor = clamp_rel * lambda_max;
    let roots = vals.mapv(|v| if v < floor { 0.0 } else { v.sqrt() });
    Ok(vecs * &roots)
}

/// Draw `n_samples` seeded trajectories of the field on its grid.
pub fn sample_field(field: &GaussianField, n_samples: usize, seed: u64) -> Result<SampleBatch> {
    if n_samples < 1 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    let n = field.len();
    let factor = psd_factor(&field.cov, crate::metrics::EIG_CLAMP_REL)?;
    let mut trajectories = Array2::zeros((n_samples, n));
    for j in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let z = Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let traj = &field.mean + &factor.dot(&z);
        trajectories.row_mut(j).assign(&traj);
    }
    Ok(SampleBatch {
        trajectories,
        seed,
        source: format!("gaussian field on {n} grid points"),
    })
}

/// Per-trajectory maximum over the grid values.
pub fn max_functional(batch: &SampleBatch) -> Vec<f64> {
    batch
        .trajectories
        .outer_iter()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}
