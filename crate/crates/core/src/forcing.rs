//! Gaussian-process forcing model: mean function plus squared-exponential
//! covariance kernel.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::field::Point;

/// Forcing process f ~ GP(mean, k) with
/// k(x, y) = sigma_f² exp(-|x - y|² / (2 l_f²)).
#[derive(Clone)]
pub struct ForcingModel {
    mean: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    mean_is_unit: bool,
    pub sigma_f: f64,
    pub length_scale: f64,
}

impl std::fmt::Debug for ForcingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForcingModel")
            .field("sigma_f", &self.sigma_f)
            .field("length_scale", &self.length_scale)
            .field("mean_is_unit", &self.mean_is_unit)
            .finish()
    }
}

impl ForcingModel {
    /// Model with constant unit mean, the default of all experiments.
    pub fn new(sigma_f: f64, length_scale: f64) -> ForcingModel {
        assert!(sigma_f > 0.0 && length_scale > 0.0);
        ForcingModel {
            mean: Arc::new(|_| 1.0),
            mean_is_unit: true,
            sigma_f,
            length_scale,
        }
    }

    pub fn with_mean<F>(sigma_f: f64, length_scale: f64, mean: F) -> ForcingModel
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        assert!(sigma_f > 0.0 && length_scale > 0.0);
        ForcingModel {
            mean: Arc::new(mean),
            mean_is_unit: false,
            sigma_f,
            length_scale,
        }
    }

    pub fn mean(&self, p: Point) -> f64 {
        (self.mean)(p)
    }

    /// True when the mean is the constant 1 (enables the analytic mean path
    /// of the 1D reference prior).
    pub fn mean_is_unit(&self) -> bool {
        self.mean_is_unit
    }

    /// Kernel value k(x, y).
    pub fn kernel_eval(&self, x: Point, y: Point) -> f64 {
        let dx = x[0] - y[0];
        let dy = x[1] - y[1];
        let d2 = dx * dx + dy * dy;
        self.sigma_f * self.sigma_f * (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    /// Kernel matrix with entries k(a_pts\[a\], b_pts\[b\]).
    pub fn kernel_matrix(&self, a_pts: &[Point], b_pts: &[Point]) -> Array2<f64> {
        Array2::from_shape_fn((a_pts.len(), b_pts.len()), |(i, j)| {
            self.kernel_eval(a_pts[i], b_pts[j])
        })
    }

    /// Mean vector over a point set.
    pub fn mean_vector(&self, pts: &[Point]) -> Array1<f64> {
        Array1::from_iter(pts.iter().map(|&p| self.mean(p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigvalsh;

    #[test]
    fn kernel_diagonal_is_sigma_squared() {
        let m = ForcingModel::new(0.1, 0.4);
        for x in [0.0, 0.3, 1.0] {
            assert!((m.kernel_eval([x, 0.0], [x, 0.0]) - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_is_symmetric() {
        let m = ForcingModel::new(0.1, 0.4);
        let a = [0.3, 0.1];
        let b = [0.7, 0.9];
        assert_eq!(m.kernel_eval(a, b), m.kernel_eval(b, a));
    }

    #[test]
    fn kernel_value_at_one_lengthscale() {
        let m = ForcingModel::new(0.1, 0.4);
        let got = m.kernel_eval([0.0, 0.0], [0.4, 0.0]);
        assert!((got - 0.01 * (-0.5_f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn kernel_decays_with_distance() {
        let m = ForcingModel::new(0.1, 0.4);
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let v = m.kernel_eval([0.0, 0.0], [0.1 * k as f64, 0.0]);
            assert!(v < last || k == 0);
            assert!(v > 0.0 && v <= 0.01 + 1e-16);
            last = v;
        }
    }

    #[test]
    fn kernel_matrix_shapes_and_diagonal() {
        let m = ForcingModel::new(0.1, 0.4);
        let pts = [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]];
        let c = m.kernel_matrix(&pts, &pts);
        for i in 0..3 {
            assert!((c[(i, i)] - 0.01).abs() < 1e-15);
        }
        let single = m.kernel_matrix(&pts[..1], &pts[..1]);
        assert_eq!(single.shape(), &[1, 1]);
    }

    #[test]
    fn square_kernel_matrix_is_numerically_psd() {
        let m = ForcingModel::new(0.1, 0.4);
        let pts: Vec<Point> = (0..25).map(|i| [i as f64 / 24.0, 0.0]).collect();
        let c = m.kernel_matrix(&pts, &pts);
        let trace: f64 = c.diag().sum();
        let vals = sym_eigvalsh(&c).unwrap();
        assert!(vals[0] >= -1e-12 * trace, "lambda_min = {}", vals[0]);
    }
}
