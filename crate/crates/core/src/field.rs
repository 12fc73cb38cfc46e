//! Grid-restricted Gaussian fields and the sources that produce them.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;

/// A point of the closed domain. 1D points carry a zero second coordinate.
pub type Point = [f64; 2];

/// Reference grid with trapezoidal quadrature weights.
///
/// The weights turn the Euclidean inner product on grid values into an
/// approximation of the L²(D) inner product, which is the geometry all
/// Wasserstein distances between fields are taken in.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl Grid {
    /// Equispaced grid of `n_points >= 2` on [0, 1], endpoints included.
    pub fn uniform_1d(n_points: usize) -> Result<Grid> {
        if n_points < 2 {
            return Err(Error::InvalidArgument(format!(
                "uniform_1d needs at least 2 points, got {n_points}"
            )));
        }
        let dx = 1.0 / (n_points - 1) as f64;
        let points = (0..n_points).map(|i| [i as f64 * dx, 0.0]).collect();
        let weights = trapezoid_weights(n_points, dx);
        Ok(Grid { points, weights })
    }

    /// Tensor grid of `n_per_side²` points on [0, 1]², boundary included,
    /// ordered row-major (y outer, x inner). Weights are the tensor product
    /// of 1D trapezoid weights and sum to 1.
    pub fn tensor_2d(n_per_side: usize) -> Result<Grid> {
        if n_per_side < 2 {
            return Err(Error::InvalidArgument(format!(
                "tensor_2d needs at least 2 points per side, got {n_per_side}"
            )));
        }
        let dx = 1.0 / (n_per_side - 1) as f64;
        let w1 = trapezoid_weights(n_per_side, dx);
        let mut points = Vec::with_capacity(n_per_side * n_per_side);
        let mut weights = Vec::with_capacity(n_per_side * n_per_side);
        for j in 0..n_per_side {
            for i in 0..n_per_side {
                points.push([i as f64 * dx, j as f64 * dx]);
                weights.push(w1[i] * w1[j]);
            }
        }
        Ok(Grid { points, weights })
    }

    pub fn from_parts(points: Vec<Point>, weights: Vec<f64>) -> Result<Grid> {
        if points.len() != weights.len() {
            return Err(Error::InvalidArgument(
                "grid points and weights must have equal length".into(),
            ));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidArgument(
                "grid quadrature weights must be positive".into(),
            ));
        }
        Ok(Grid { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the grid point equal to `p` within `tol` per coordinate.
    pub fn find(&self, p: Point, tol: f64) -> Option<usize> {
        self.points
            .iter()
            .position(|q| (q[0] - p[0]).abs() <= tol && (q[1] - p[1]).abs() <= tol)
    }

    /// Grids are compatible when points and weights agree to tight absolute
    /// tolerance.
    pub fn compatible_with(&self, other: &Grid) -> bool {
        self.len() == other.len()
            && self
                .points
                .iter()
                .zip(other.points.iter())
                .all(|(a, b)| (a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12)
            && self
                .weights
                .iter()
                .zip(other.weights.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-12)
    }
}

fn trapezoid_weights(n: usize, dx: f64) -> Vec<f64> {
    (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * dx } else { dx })
        .collect()
}

/// Gaussian measure restricted to a reference grid: mean vector and
/// covariance matrix over the grid values, with the grid's quadrature
/// weights defining the L² geometry.
#[derive(Debug, Clone)]
pub struct GaussianField {
    pub grid: Grid,
    pub mean: Array1<f64>,
    pub cov: Array2<f64>,
}

impl GaussianField {
    /// Build a field, symmetrizing the covariance and validating shapes.
    pub fn new(grid: Grid, mean: Array1<f64>, mut cov: Array2<f64>) -> Result<GaussianField> {
        let n = grid.len();
        if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "field shapes (mean {}, cov {}x{}) do not match grid size {n}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if linalg::asymmetry(&cov.view()) > 1e-10 {
            return Err(Error::Numerical(
                "covariance is not symmetric to 1e-10 relative".into(),
            ));
        }
        linalg::symmetrize(&mut cov);
        Ok(GaussianField { grid, mean, cov })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Pointwise variances (the covariance diagonal).
    pub fn variances(&self) -> Array1<f64> {
        self.cov.diag().to_owned()
    }

    /// Same covariance, zero mean.
    pub fn centered(&self) -> GaussianField {
        GaussianField {
            grid: self.grid.clone(),
            mean: Array1::zeros(self.mean.len()),
            cov: self.cov.clone(),
        }
    }
}

/// Univariate Gaussian, the image of a field under a linear functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateGaussian {
    pub mean: f64,
    pub variance: f64,
}

/// A Gaussian measure over functions that can be evaluated on arbitrary
/// finite point sets: mean vector and cross-covariance matrices.
///
/// Both the finite element prior and the 1D Green's-function reference
/// implement this; conditioning on off-grid sensors and sensor-data
/// generation are written against it.
pub trait GaussianSource {
    /// Mean function at the given points.
    fn mean_at(&self, pts: &[Point]) -> Result<Array1<f64>>;

    /// Covariance function evaluated between two point sets
    /// (`rows = a`, `cols = b`).
    fn cov_between(&self, a: &[Point], b: &[Point]) -> Result<Array2<f64>>;

    /// Restrict the measure to a reference grid.
    fn field_on_grid(&self, grid: &Grid) -> Result<GaussianField> {
        let mean = self.mean_at(grid.points())?;
        let cov = self.cov_between(grid.points(), grid.points())?;
        GaussianField::new(grid.clone(), mean, cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights_sum_to_measure() {
        let g = Grid::uniform_1d(51).unwrap();
        let sum: f64 = g.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let g = Grid::tensor_2d(41).unwrap();
        assert_eq!(g.len(), 1681);
        let sum: f64 = g.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_find_locates_points() {
        let g = Grid::uniform_1d(5).unwrap();
        assert_eq!(g.find([0.5, 0.0], 1e-12), Some(2));
        assert_eq!(g.find([0.3, 0.0], 1e-12), None);
    }

    #[test]
    fn field_rejects_asymmetric_covariance() {
        let g = Grid::uniform_1d(2).unwrap();
        let mean = Array1::zeros(2);
        let cov = ndarray::array![[1.0, 0.5], [0.0, 1.0]];
        assert!(GaussianField::new(g, mean, cov).is_err());
    }

    #[test]
    fn rejects_too_small_grids() {
        assert!(Grid::uniform_1d(1).is_err());
        assert!(Grid::tensor_2d(1).is_err());
    }
}
