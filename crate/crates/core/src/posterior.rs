//! Pointwise sensor model and Gaussian conditioning.
//!
//! Observations v = S u + ξ with ξ ~ N(0, ε²I) and S pointwise evaluation at
//! the sensor locations. Conditioning a Gaussian prior on v stays Gaussian:
//!
//!   m' = m + kᵀ B_ε⁻¹ (v - S m),   k' = k - kᵀ B_ε⁻¹ k,
//!   B_ε = ε² I + S Σ Sᵀ,
//!
//! with k the cross-covariance between field values and sensor values.

use ndarray::{Array1, Array2};
use ndarray_linalg::cholesky::CholeskyInto;
use ndarray_linalg::triangular::SolveTriangular;
use ndarray_linalg::{Diag, UPLO};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{GaussianField, GaussianSource, Point, UnivariateGaussian};
use crate::linalg::symmetrize;
use crate::metrics::EIG_CLAMP_REL;
use crate::sampling::psd_factor;

/// Sensor locations, noise level and (optionally) the observed values.
#[derive(Debug, Clone)]
pub struct SensorSet {
    pub locations: Vec<Point>,
    pub epsilon: f64,
    pub values: Option<Array1<f64>>,
}

impl SensorSet {
    pub fn new(locations: Vec<Point>, epsilon: f64) -> Result<SensorSet> {
        if locations.is_empty() {
            return Err(Error::InvalidArgument("need at least one sensor".into()));
        }
        if epsilon <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sensor noise must be strictly positive, got {epsilon}"
            )));
        }
        for (i, a) in locations.iter().enumerate() {
            for b in locations.iter().skip(i + 1) {
                if (a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14 {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate sensor location ({}, {})",
                        a[0], a[1]
                    )));
                }
            }
        }
        Ok(SensorSet {
            locations,
            epsilon,
            values: None,
        })
    }

    /// `s` sensors equally spaced over [lo, hi] on the interval domain.
    pub fn equispaced_1d(s: usize, lo: f64, hi: f64, epsilon: f64) -> Result<SensorSet> {
        if s < 1 || hi <= lo {
            return Err(Error::InvalidArgument(format!(
                "bad 1D sensor layout: s = {s}, range [{lo}, {hi}]"
            )));
        }
        let locations = if s == 1 {
            vec![[0.5 * (lo + hi), 0.0]]
        } else {
            (0..s)
                .map(|i| [lo + (hi - lo) * i as f64 / (s - 1) as f64, 0.0])
                .collect()
        };
        SensorSet::new(locations, epsilon)
    }

    /// `per_side²` sensors on a tensor grid over [lo, hi]².
    pub fn tensor_2d(per_side: usize, lo: f64, hi: f64, epsilon: f64) -> Result<SensorSet> {
        if per_side < 2 || hi <= lo {
            return Err(Error::InvalidArgument(format!(
                "bad 2D sensor layout: per_side = {per_side}, range [{lo}, {hi}]"
            )));
        }
        let axis: Vec<f64> = (0..per_side)
            .map(|i| lo + (hi - lo) * i as f64 / (per_side - 1) as f64)
            .collect();
        let mut locations = Vec::with_capacity(per_side * per_side);
        for &y in &axis {
            for &x in &axis {
                locations.push([x, y]);
            }
        }
        SensorSet::new(locations, epsilon)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn with_values(mut self, values: Array1<f64>) -> Result<SensorSet> {
        if values.len() != self.locations.len() {
            return Err(Error::InvalidArgument(format!(
                "{} observation values for {} sensors",
                values.len(),
                self.locations.len()
            )));
        }
        self.values = Some(values);
        Ok(self)
    }
}

/// Draw one seeded observation vector from the source at the sensor
/// locations: v = draw of N(mean, cov) + ε ξ. Identical seeds give
/// identical vectors.
pub fn generate_sensor_data(
    source: &dyn GaussianSource,
    sensors: &SensorSet,
    seed: u64,
) -> Result<Array1<f64>> {
    let mean = source.mean_at(&sensors.locations)?;
    let mut cov = source.cov_between(&sensors.locations, &sensors.locations)?;
    symmetrize(&mut cov);
    let factor = psd_factor(&cov, EIG_CLAMP_REL)?;
    let s = sensors.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Array1::from_iter((0..s).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let xi = Array1::from_iter((0..s).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok(&mean + &factor.dot(&z) + &(xi * sensors.epsilon))
}

/// Conditioning core shared by the on-grid and source-backed paths.
fn condition_blocks(
    prior: &GaussianField,
    cross: &Array2<f64>,
    sensor_mean: &Array1<f64>,
    sensor_cov: &Array2<f64>,
    sensors: &SensorSet,
) -> Result<GaussianField> {
    let values = sensors.values.as_ref().ok_or_else(|| {
        Error::InvalidArgument("conditioning needs sensor values; call with_values first".into())
    })?;
    let s = sensors.len();
    let mut b_eps = sensor_cov.clone();
    symmetrize(&mut b_eps);
    let eps2 = sensors.epsilon * sensors.epsilon;
    for i in 0..s {
        b_eps[(i, i)] += eps2;
    }
    let l = b_eps
        .cholesky_into(UPLO::Lower)
        .map_err(|e| Error::Conditioning(format!("B_eps Cholesky failed: {e}")))?;
    // Y = L⁻¹ crossᵀ, so cross B⁻¹ crossᵀ = Yᵀ Y stays PSD by construction.
    let y: Array2<f64> = l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &cross.t().to_owned())
        .map_err(|e| Error::Conditioning(format!("triangular solve failed: {e}")))?;
    let innovation = values - sensor_mean;
    let w: Array1<f64> = l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &innovation)
        .map_err(|e| Error::Conditioning(format!("triangular solve failed: {e}")))?;
    let mean = &prior.mean + &y.t().dot(&w);
    let mut cov = &prior.cov - &y.t().dot(&y);
    symmetrize(&mut cov);
    GaussianField::new(prior.grid.clone(), mean, cov)
}

/// Condition a prior field on sensors that sit on its own grid.
pub fn condition(prior: &GaussianField, sensors: &SensorSet) -> Result<GaussianField> {
    let mut indices = Vec::with_capacity(sensors.len());
    for &loc in &sensors.locations {
        match prior.grid.find(loc, 1e-9) {
            Some(k) => indices.push(k),
            None => return Err(Error::SensorLocation(loc)),
        }
    }
    let n = prior.len();
    let s = indices.len();
    let cross = Array2::from_shape_fn((n, s), |(i, j)| prior.cov[(i, indices[j])]);
    let sensor_cov = Array2::from_shape_fn((s, s), |(i, j)| prior.cov[(indices[i], indices[j])]);
    let sensor_mean = Array1::from_iter(indices.iter().map(|&k| prior.mean[k]));
    condition_blocks(prior, &cross, &sensor_mean, &sensor_cov, sensors)
}

/// Condition a prior field on arbitrary sensor locations, with the
/// cross-covariances supplied by the source that produced the field.
pub fn condition_from_source(
    prior: &GaussianField,
    source: &dyn GaussianSource,
    sensors: &SensorSet,
) -> Result<GaussianField> {
    let cross = source.cov_between(prior.grid.points(), &sensors.locations)?;
    let sensor_cov = source.cov_between(&sensors.locations, &sensors.locations)?;
    let sensor_mean = source.mean_at(&sensors.locations)?;
    condition_blocks(prior, &cross, &sensor_mean, &sensor_cov, sensors)
}

/// A source evaluated jointly on a grid and a set of sensor locations: the
/// prior field plus the cross- and sensor-covariance blocks needed for
/// conditioning. Evaluating once and conditioning repeatedly avoids paying
/// the covariance evaluation per noise level.
pub struct SourceOnGrid {
    prior: GaussianField,
    locations: Vec<Point>,
    cross: Array2<f64>,
    sensor_mean: Array1<f64>,
    sensor_cov: Array2<f64>,
}

impl SourceOnGrid {
    /// Evaluate a source on grid ∪ locations in a single covariance pass.
    pub fn evaluate(
        source: &dyn GaussianSource,
        grid: &crate::field::Grid,
        locations: &[Point],
    ) -> Result<SourceOnGrid> {
        let n = grid.len();
        let s = locations.len();
        let mut aug: Vec<Point> = Vec::with_capacity(n + s);
        aug.extend_from_slice(grid.points());
        aug.extend_from_slice(locations);
        let mean_aug = source.mean_at(&aug)?;
        let cov_aug = source.cov_between(&aug, &aug)?;
        let grid_cov = cov_aug.slice(ndarray::s![..n, ..n]).to_owned();
        let cross = cov_aug.slice(ndarray::s![..n, n..]).to_owned();
        let mut sensor_cov = cov_aug.slice(ndarray::s![n.., n..]).to_owned();
        symmetrize(&mut sensor_cov);
        let sensor_mean = mean_aug.slice(ndarray::s![n..]).to_owned();
        let prior = GaussianField::new(
            grid.clone(),
            mean_aug.slice(ndarray::s![..n]).to_owned(),
            grid_cov,
        )?;
        Ok(SourceOnGrid {
            prior,
            locations: locations.to_vec(),
            cross,
            sensor_mean,
            sensor_cov,
        })
    }

    pub fn prior(&self) -> &GaussianField {
        &self.prior
    }

    fn check_locations(&self, sensors: &SensorSet) -> Result<()> {
        if sensors.locations != self.locations {
            return Err(Error::InvalidArgument(
                "sensor locations differ from the ones this source was evaluated at".into(),
            ));
        }
        Ok(())
    }

    /// Condition the stored prior on observed values at the stored
    /// locations.
    pub fn condition(&self, sensors: &SensorSet) -> Result<GaussianField> {
        self.check_locations(sensors)?;
        condition_blocks(
            &self.prior,
            &self.cross,
            &self.sensor_mean,
            &self.sensor_cov,
            sensors,
        )
    }

    /// Seeded observation draw from the stored sensor blocks; the same draw
    /// law as [`generate_sensor_data`].
    pub fn generate_values(&self, sensors: &SensorSet, seed: u64) -> Result<Array1<f64>> {
        self.check_locations(sensors)?;
        let factor = psd_factor(&self.sensor_cov, EIG_CLAMP_REL)?;
        let s = sensors.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Array1::from_iter((0..s).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let xi = Array1::from_iter((0..s).map(|_| rng.sample::<f64, _>(StandardNormal)));
        Ok(&self.sensor_mean + &factor.dot(&z) + &(xi * sensors.epsilon))
    }
}

/// Build the posterior field of a source over a grid in one pass.
pub fn posterior_field_on_grid(
    source: &dyn GaussianSource,
    grid: &crate::field::Grid,
    sensors: &SensorSet,
) -> Result<GaussianField> {
    SourceOnGrid::evaluate(source, grid, &sensors.locations)?.condition(sensors)
}

/// Image of the field under the linear functional ℓu = Σ_k weights_k u(x̃_k).
pub fn pushforward_linear_functional(
    field: &GaussianField,
    weights: &Array1<f64>,
) -> Result<UnivariateGaussian> {
    if weights.len() != field.len() {
        return Err(Error::InvalidArgument(format!(
            "functional weights length {} != grid size {}",
            weights.len(),
            field.len()
        )));
    }
    let mean = weights.dot(&field.mean);
    let variance = weights.dot(&field.cov.dot(weights)).max(0.0);
    Ok(UnivariateGaussian { mean, variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use ndarray::array;

    fn scalar_prior() -> GaussianField {
        let grid = Grid::from_parts(vec![[0.5, 0.0]], vec![1.0]).unwrap();
        GaussianField::new(grid, array![0.0], array![[1.0]]).unwrap()
    }

    fn random_field(n: usize, seed: u64) -> GaussianField {
        let grid = Grid::uniform_1d(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
        let cov = g.dot(&g.t());
        let mean = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        GaussianField::new(grid, mean, cov).unwrap()
    }

    #[test]
    fn scalar_closed_form() {
        // prior N(0, 1), eps = 1, v = 2: posterior mean 1, variance 0.5
        let prior = scalar_prior();
        let sensors = SensorSet::new(vec![[0.5, 0.0]], 1.0)
            .unwrap()
            .with_values(array![2.0])
            .unwrap();
        let post = condition(&prior, &sensors).unwrap();
        assert!((post.mean[0] - 1.0).abs() < 1e-12);
        assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn enormous_noise_recovers_prior_mean() {
        let prior = random_field(9, 42);
        let locs: Vec<Point> = vec![prior.grid.points()[2], prior.grid.points()[6]];
        let v = array![5.0, -3.0];
        let sensors = SensorSet::new(locs, 1e6)
            .unwrap()
            .with_values(v.clone())
            .unwrap();
        let post = condition(&prior, &sensors).unwrap();
        let vnorm = v.dot(&v).sqrt();
        for k in 0..prior.len() {
            assert!(
                (post.mean[k] - prior.mean[k]).abs() <= 1e-9 * vnorm,
                "entry {k} moved by {}",
                (post.mean[k] - prior.mean[k]).abs()
            );
        }
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let prior = random_field(7, 3);
        let idx = [1usize, 4];
        let locs: Vec<Point> = idx.iter().map(|&i| prior.grid.points()[i]).collect();
        let v = Array1::from_iter(idx.iter().map(|&i| prior.mean[i]));
        let sensors = SensorSet::new(locs, 0.1).unwrap().with_values(v).unwrap();
        let post = condition(&prior, &sensors).unwrap();
        for k in 0..prior.len() {
            assert_eq!(post.mean[k], prior.mean[k]);
        }
    }

    #[test]
    fn posterior_variances_never_exceed_prior() {
        let prior = random_field(11, 17);
        let locs: Vec<Point> = vec![prior.grid.points()[3], prior.grid.points()[8]];
        let sensors = SensorSet::new(locs, 0.05)
            .unwrap()
            .with_values(array![1.0, -0.5])
            .unwrap();
        let post = condition(&prior, &sensors).unwrap();
        for k in 0..prior.len() {
            assert!(post.cov[(k, k)] <= prior.cov[(k, k)] + 1e-12);
        }
    }

    #[test]
    fn sequential_conditioning_matches_joint() {
        let prior = random_field(13, 29);
        let idx = [2usize, 5, 9, 11];
        let locs: Vec<Point> = idx.iter().map(|&i| prior.grid.points()[i]).collect();
        let eps = 0.2;
        let v = array![0.7, -0.1, 0.3, 0.9];
        let joint = condition(
            &prior,
            &SensorSet::new(locs.clone(), eps)
                .unwrap()
                .with_values(v.clone())
                .unwrap(),
        )
        .unwrap();
        let first = condition(
            &prior,
            &SensorSet::new(locs[..2].to_vec(), eps)
                .unwrap()
                .with_values(array![0.7, -0.1])
                .unwrap(),
        )
        .unwrap();
        let staged = condition(
            &first,
            &SensorSet::new(locs[2..].to_vec(), eps)
                .unwrap()
                .with_values(array![0.3, 0.9])
                .unwrap(),
        )
        .unwrap();
        let scale = joint.mean.mapv(f64::abs).sum().max(1e-12);
        for k in 0..prior.len() {
            assert!(
                (joint.mean[k] - staged.mean[k]).abs() <= 1e-8 * scale,
                "mean mismatch at {k}"
            );
        }
        let cscale = joint.cov.mapv(f64::abs).iter().cloned().fold(0.0, f64::max);
        for ((i, j), v) in joint.cov.indexed_iter() {
            assert!(
                (v - staged.cov[(i, j)]).abs() <= 1e-8 * cscale,
                "cov mismatch at ({i},{j})"
            );
        }
    }

    #[test]
    fn off_grid_sensor_is_a_location_error() {
        let prior = random_field(5, 1);
        let sensors = SensorSet::new(vec![[0.33, 0.0]], 0.1)
            .unwrap()
            .with_values(array![0.0])
            .unwrap();
        assert!(matches!(
            condition(&prior, &sensors),
            Err(Error::SensorLocation(_))
        ));
    }

    #[test]
    fn conditioning_without_values_is_rejected() {
        let prior = scalar_prior();
        let sensors = SensorSet::new(vec![[0.5, 0.0]], 1.0).unwrap();
        assert!(condition(&prior, &sensors).is_err());
    }

    #[test]
    fn sensor_set_validation() {
        assert!(SensorSet::new(vec![], 0.1).is_err());
        assert!(SensorSet::new(vec![[0.5, 0.0]], 0.0).is_err());
        assert!(SensorSet::new(vec![[0.5, 0.0], [0.5, 0.0]], 0.1).is_err());
        let s = SensorSet::equispaced_1d(10, 0.01, 0.99, 0.1).unwrap();
        assert_eq!(s.len(), 10);
        assert_eq!(s.locations[0], [0.01, 0.0]);
        assert_eq!(s.locations[9], [0.99, 0.0]);
        let s = SensorSet::tensor_2d(5, 0.01, 0.99, 0.1).unwrap();
        assert_eq!(s.len(), 25);
        assert_eq!(s.locations[0], [0.01, 0.01]);
        assert_eq!(s.locations[24], [0.99, 0.99]);
    }

    #[test]
    fn generated_data_is_deterministic_and_sized() {
        struct Flat;
        impl GaussianSource for Flat {
            fn mean_at(&self, pts: &[Point]) -> crate::error::Result<Array1<f64>> {
                Ok(Array1::from_elem(pts.len(), 2.0))
            }
            fn cov_between(&self, a: &[Point], b: &[Point]) -> crate::error::Result<Array2<f64>> {
                Ok(Array2::from_shape_fn((a.len(), b.len()), |(i, j)| {
                    if a[i] == b[j] {
                        1e-8
                    } else {
                        0.0
                    }
                }))
            }
        }
        let sensors = SensorSet::equispaced_1d(10, 0.01, 0.99, 1e-6).unwrap();
        let v1 = generate_sensor_data(&Flat, &sensors, 7).unwrap();
        let v2 = generate_sensor_data(&Flat, &sensors, 7).unwrap();
        assert_eq!(v1.len(), 10);
        assert_eq!(v1, v2);
        let v3 = generate_sensor_data(&Flat, &sensors, 8).unwrap();
        assert_ne!(v1, v3);
        // nearly deterministic source: values hug the mean
        for &v in v1.iter() {
            assert!((v - 2.0).abs() <= 6e-4);
        }
    }

    #[test]
    fn pushforward_evaluation_functional() {
        let f = random_field(6, 5);
        let mut e3 = Array1::zeros(6);
        e3[3] = 1.0;
        let g = pushforward_linear_functional(&f, &e3).unwrap();
        assert_eq!(g.mean, f.mean[3]);
        assert_eq!(g.variance, f.cov[(3, 3)]);
        let z = pushforward_linear_functional(&f, &Array1::zeros(6)).unwrap();
        assert_eq!(z.mean, 0.0);
        assert_eq!(z.variance, 0.0);
        assert!(pushforward_linear_functional(&f, &Array1::zeros(4)).is_err());
    }
}
