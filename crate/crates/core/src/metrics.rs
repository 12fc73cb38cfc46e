//! Wasserstein-2 distances.
//!
//! Between grid-restricted Gaussian fields the closed form
//! W² = ‖m₁-m₂‖² + tr Σ₁ + tr Σ₂ - 2 tr √(Σ₁^{1/2} Σ₂ Σ₁^{1/2})
//! is evaluated in the L² geometry induced by the grid quadrature weights:
//! means and covariances are rescaled by √w before entering the formula.
//! Univariate Gaussians and sorted 1D empirical samples have elementary
//! closed forms.

use ndarray::{Array1, Array2};
use ndarray_linalg::SVD;

use crate::error::{Error, Result};
use crate::field::{GaussianField, Grid, UnivariateGaussian};
use crate::linalg::{asymmetry, sym_eigh, symmetrize};

/// Relative eigenvalue clamp applied before square roots.
pub const EIG_CLAMP_REL: f64 = 1e-12;

/// Symmetric PSD square root with the spectral mass that was clamped away.
#[derive(Debug, Clone)]
pub struct PsdSqrtResult {
    pub sqrt: Array2<f64>,
    /// Sum of the negated negative eigenvalues of the input.
    pub clamped_mass: f64,
}

/// Square root of a symmetric PSD matrix by eigendecomposition, zeroing
/// eigenvalues below `tol * lambda_max`.
pub fn sym_psd_sqrt(c: &Array2<f64>, tol: f64) -> Result<PsdSqrtResult> {
    if c.nrows() != c.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, expected square",
            c.nrows(),
            c.ncols()
        )));
    }
    if asymmetry(&c.view()) > 1e-10 {
        return Err(Error::InvalidArgument(
            "matrix is not symmetric to 1e-10 relative".into(),
        ));
    }
    let mut work = c.clone();
    symmetrize(&mut work);
    let (vals, vecs) = sym_eigh(&work)?;
    let lambda_max = vals.iter().cloned().fold(0.0_f64, f64::max);
    let clamped_mass = vals.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let floor = tol * lambda_max;
    let roots = vals.mapv(|v| if v < floor { 0.0 } else { v.sqrt() });
    // sqrt = V diag(sqrt(lambda)) Vᵀ
    let scaled = &vecs * &roots;
    let mut sqrt = scaled.dot(&vecs.t());
    symmetrize(&mut sqrt);
    Ok(PsdSqrtResult { sqrt, clamped_mass })
}

fn weighted_moments(field: &GaussianField) -> (Array1<f64>, Array2<f64>) {
    let sw = Array1::from_iter(field.grid.weights().iter().map(|w| w.sqrt()));
    let mean = &field.mean * &sw;
    let mut cov = field.cov.clone();
    for ((i, j), v) in cov.indexed_iter_mut() {
        *v *= sw[i] * sw[j];
    }
    (mean, cov)
}

/// A field with its weighted mean, covariance trace and covariance square
/// root cached, so ladder sweeps reuse the expensive eigendecomposition
/// across pairs.
pub struct PreparedField {
    grid: Grid,
    mean_w: Array1<f64>,
    trace_w: f64,
    sqrt_w: Array2<f64>,
}

impl PreparedField {
    pub fn new(field: &GaussianField) -> Result<PreparedField> {
        let (mean_w, cov_w) = weighted_moments(field);
        let trace_w = cov_w.diag().sum();
        let sqrt_w = sym_psd_sqrt(&cov_w, EIG_CLAMP_REL)?.sqrt;
        Ok(PreparedField {
            grid: field.grid.clone(),
            mean_w,
            trace_w,
            sqrt_w,
        })
    }
}

/// The closed form evaluated from the square roots: the trace term
/// tr sqrt(Σ₁^{1/2} Σ₂ Σ₁^{1/2}) equals the nuclear norm of S₁ S₂, which
/// avoids squaring the spectrum and keeps W(g, g) at roundoff level.
fn bures_w2(a: &PreparedField, b: &PreparedField) -> Result<f64> {
    let dm = &a.mean_w - &b.mean_w;
    let mean_term = dm.dot(&dm);
    let prod = a.sqrt_w.dot(&b.sqrt_w);
    let (_, singular, _) = prod
        .svd(false, false)
        .map_err(|e| Error::Numerical(format!("singular values failed: {e}")))?;
    let tr_sqrt: f64 = singular.sum();
    let w2 = mean_term + a.trace_w + b.trace_w - 2.0 * tr_sqrt;
    Ok(w2.max(0.0).sqrt())
}

/// W₂ between two prepared fields.
pub fn wasserstein2_prepared(a: &PreparedField, b: &PreparedField) -> Result<f64> {
    if !a.grid.compatible_with(&b.grid) {
        return Err(Error::IncompatibleFields(
            "prepared fields live on different grids".into(),
        ));
    }
    // metric identity holds exactly on identical moments; bit-equality is
    // the cheap sufficient check
    if a.mean_w == b.mean_w && a.trace_w == b.trace_w && a.sqrt_w == b.sqrt_w {
        return Ok(0.0);
    }
    bures_w2(a, b)
}

/// W₂ between two Gaussian fields sharing a grid, in the weighted L²
/// geometry.
pub fn wasserstein2_gaussian_fields(g1: &GaussianField, g2: &GaussianField) -> Result<f64> {
    if !g1.grid.compatible_with(&g2.grid) {
        return Err(Error::IncompatibleFields(
            "fields live on different grids or weights".into(),
        ));
    }
    if g1.mean == g2.mean && g1.cov == g2.cov {
        return Ok(0.0);
    }
    bures_w2(&PreparedField::new(g1)?, &PreparedField::new(g2)?)
}

/// W₂ between univariate Gaussians:
/// sqrt((m_a - m_b)² + (sqrt(v_a) - sqrt(v_b))²).
pub fn wasserstein2_univariate_gaussian(
    a: UnivariateGaussian,
    b: UnivariateGaussian,
) -> Result<f64> {
    if a.variance < 0.0 || b.variance < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "variances must be nonnegative, got {} and {}",
            a.variance, b.variance
        )));
    }
    let dm = a.mean - b.mean;
    let ds = a.variance.sqrt() - b.variance.sqrt();
    Ok((dm * dm + ds * ds).sqrt())
}

/// Exact W₂ between equally sized 1D empirical distributions via the sorted
/// (monotone) coupling.
pub fn wasserstein2_empirical_1d(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "empirical W2 needs equal nonempty sample sizes, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    ys.sort_by(|a, b| a.total_cmp(b));
    let mean_sq = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / xs.len() as f64;
    Ok(mean_sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_grid(n: usize) -> Grid {
        Grid::from_parts((0..n).map(|i| [i as f64, 0.0]).collect(), vec![1.0; n]).unwrap()
    }

    fn field(grid: &Grid, mean: Array1<f64>, cov: Array2<f64>) -> GaussianField {
        GaussianField::new(grid.clone(), mean, cov).unwrap()
    }

    fn random_psd(n: usize, rng: &mut impl Rng) -> Array2<f64> {
        let g = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
        g.dot(&g.t())
    }

    #[test]
    fn sqrt_of_identity_is_identity() {
        let r = sym_psd_sqrt(&Array2::eye(4), EIG_CLAMP_REL).unwrap();
        for ((i, j), v) in r.sqrt.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
        assert_eq!(r.clamped_mass, 0.0);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let r = sym_psd_sqrt(&Array2::from_diag(&array![4.0, 9.0]), EIG_CLAMP_REL).unwrap();
        assert!((r.sqrt[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((r.sqrt[(1, 1)] - 3.0).abs() < 1e-12);
        assert!(r.sqrt[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let c = random_psd(6, &mut rng);
            let r = sym_psd_sqrt(&c, EIG_CLAMP_REL).unwrap();
            let back = r.sqrt.dot(&r.sqrt);
            let num = (&back - &c).mapv(|v| v * v).sum().sqrt();
            let den = c.mapv(|v| v * v).sum().sqrt();
            assert!(num / den < 1e-8);
        }
    }

    #[test]
    fn sqrt_rejects_asymmetric_input() {
        let c = array![[1.0, 0.4], [0.0, 1.0]];
        assert!(matches!(
            sym_psd_sqrt(&c, EIG_CLAMP_REL),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sqrt_reports_clamped_mass() {
        let c = Array2::from_diag(&array![1.0, -1e-3]);
        let r = sym_psd_sqrt(&c, EIG_CLAMP_REL).unwrap();
        assert!((r.clamped_mass - 1e-3).abs() < 1e-15);
        assert_eq!(r.sqrt[(1, 1)], 0.0);
    }

    #[test]
    fn distance_to_self_is_zero() {
        let grid = unit_grid(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cov = random_psd(5, &mut rng);
        let mean = Array1::from_shape_fn(5, |_| rng.gen_range(-1.0..1.0));
        let g = field(&grid, mean, cov);
        let w = wasserstein2_gaussian_fields(&g, &g).unwrap();
        assert!(w <= 1e-7, "W(g,g) = {w}");
        // near-identity continuity: a last-bit perturbation must not
        // produce more than roundoff-level distance
        let mut g2 = g.clone();
        g2.mean[0] += 1e-14;
        g2.cov[(1, 1)] *= 1.0 + 1e-15;
        let w = wasserstein2_gaussian_fields(&g, &g2).unwrap();
        assert!(w <= 1e-6, "W(g, g + ulp) = {w}");
    }

    #[test]
    fn commuting_diagonal_case() {
        // m1 = m2 = 0, Sigma1 = I2, Sigma2 = 4 I2, unit weights:
        // W = sqrt(sum (1 - 2)^2) = sqrt(2)
        let grid = unit_grid(2);
        let g1 = field(&grid, Array1::zeros(2), Array2::eye(2));
        let g2 = field(&grid, Array1::zeros(2), Array2::eye(2) * 4.0);
        let w = wasserstein2_gaussian_fields(&g1, &g2).unwrap();
        assert!((w - 2.0_f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn mean_shift_only_reduces_to_weighted_norm() {
        let grid = Grid::uniform_1d(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cov = random_psd(9, &mut rng);
        let m1 = Array1::from_shape_fn(9, |_| rng.gen_range(-1.0..1.0));
        let m2 = Array1::from_shape_fn(9, |_| rng.gen_range(-1.0..1.0));
        let g1 = field(&grid, m1.clone(), cov.clone());
        let g2 = field(&grid, m2.clone(), cov);
        let w = wasserstein2_gaussian_fields(&g1, &g2).unwrap();
        let want = m1
            .iter()
            .zip(m2.iter())
            .zip(grid.weights())
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!((w - want).abs() < 1e-9 * want.max(1.0));
    }

    #[test]
    fn centered_decomposition_holds() {
        let grid = Grid::uniform_1d(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let g1 = field(
                &grid,
                Array1::from_shape_fn(7, |_| rng.gen_range(-1.0..1.0)),
                random_psd(7, &mut rng),
            );
            let g2 = field(
                &grid,
                Array1::from_shape_fn(7, |_| rng.gen_range(-1.0..1.0)),
                random_psd(7, &mut rng),
            );
            let total = wasserstein2_gaussian_fields(&g1, &g2).unwrap();
            let centered = wasserstein2_gaussian_fields(&g1.centered(), &g2.centered()).unwrap();
            let mean_sq = g1
                .mean
                .iter()
                .zip(g2.mean.iter())
                .zip(grid.weights())
                .map(|((a, b), w)| w * (a - b) * (a - b))
                .sum::<f64>();
            let recomposed = (mean_sq + centered * centered).sqrt();
            assert!(
                (total - recomposed).abs() <= 1e-9 * total.max(1e-12),
                "total {total} vs recomposed {recomposed}"
            );
        }
    }

    #[test]
    fn square_root_difference_upper_bound() {
        // For Gaussians with symmetric factors S_i:
        // W² <= |a1 - a2|² + |S1 - S2|²_F
        let grid = unit_grid(5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let s1 = sym_psd_sqrt(&random_psd(5, &mut rng), EIG_CLAMP_REL)
                .unwrap()
                .sqrt;
            let s2 = sym_psd_sqrt(&random_psd(5, &mut rng), EIG_CLAMP_REL)
                .unwrap()
                .sqrt;
            let a1 = Array1::from_shape_fn(5, |_| rng.gen_range(-1.0..1.0));
            let a2 = Array1::from_shape_fn(5, |_| rng.gen_range(-1.0..1.0));
            let g1 = field(&grid, a1.clone(), s1.dot(&s1));
            let g2 = field(&grid, a2.clone(), s2.dot(&s2));
            let w = wasserstein2_gaussian_fields(&g1, &g2).unwrap();
            let dm = (&a1 - &a2).mapv(|v| v * v).sum();
            let ds = (&s1 - &s2).mapv(|v| v * v).sum();
            assert!(
                w * w <= dm + ds + 1e-9,
                "W² = {} exceeds bound {}",
                w * w,
                dm + ds
            );
        }
    }

    #[test]
    fn incompatible_grids_are_rejected() {
        let g1 = field(&unit_grid(3), Array1::zeros(3), Array2::eye(3));
        let g2 = field(
            &Grid::uniform_1d(3).unwrap(),
            Array1::zeros(3),
            Array2::eye(3),
        );
        assert!(matches!(
            wasserstein2_gaussian_fields(&g1, &g2),
            Err(Error::IncompatibleFields(_))
        ));
    }

    #[test]
    fn prepared_distance_matches_direct() {
        let grid = Grid::uniform_1d(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g1 = field(
            &grid,
            Array1::from_shape_fn(6, |_| rng.gen_range(-1.0..1.0)),
            random_psd(6, &mut rng),
        );
        let g2 = field(
            &grid,
            Array1::from_shape_fn(6, |_| rng.gen_range(-1.0..1.0)),
            random_psd(6, &mut rng),
        );
        let direct = wasserstein2_gaussian_fields(&g1, &g2).unwrap();
        let pa = PreparedField::new(&g1).unwrap();
        let pb = PreparedField::new(&g2).unwrap();
        let prepared = wasserstein2_prepared(&pa, &pb).unwrap();
        assert!((direct - prepared).abs() < 1e-10);
    }

    #[test]
    fn univariate_cases() {
        let g = |m, v| UnivariateGaussian {
            mean: m,
            variance: v,
        };
        assert_eq!(
            wasserstein2_univariate_gaussian(g(0.0, 1.0), g(0.0, 1.0)).unwrap(),
            0.0
        );
        let w = wasserstein2_univariate_gaussian(g(1.0, 4.0), g(0.0, 1.0)).unwrap();
        assert!((w - 2.0_f64.sqrt()).abs() < 1e-15);
        let w = wasserstein2_univariate_gaussian(g(3.0, 0.0), g(0.0, 0.0)).unwrap();
        assert!((w - 3.0).abs() < 1e-15);
        assert!(wasserstein2_univariate_gaussian(g(0.0, -1.0), g(0.0, 1.0)).is_err());
    }

    #[test]
    fn empirical_cases() {
        assert_eq!(
            wasserstein2_empirical_1d(&[3.0, 1.0, 2.0], &[2.0, 3.0, 1.0]).unwrap(),
            0.0
        );
        let w = wasserstein2_empirical_1d(&[0.0, 2.0], &[1.0, 3.0]).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
        assert!(wasserstein2_empirical_1d(&[1.0], &[1.0, 2.0]).is_err());
        assert!(wasserstein2_empirical_1d(&[], &[]).is_err());
    }

    #[test]
    fn empirical_matches_gaussian_closed_form() {
        // N(0,1) vs N(1,1): W2 = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let ys: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) + 1.0)
            .collect();
        let w = wasserstein2_empirical_1d(&xs, &ys).unwrap();
        assert!((w - 1.0).abs() < 0.02, "W = {w}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gaussian_field_distance_is_symmetric(seed in 0u64..1000) {
            let grid = Grid::uniform_1d(5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g1 = field(
                &grid,
                Array1::from_shape_fn(5, |_| rng.gen_range(-1.0..1.0)),
                random_psd(5, &mut rng),
            );
            let g2 = field(
                &grid,
                Array1::from_shape_fn(5, |_| rng.gen_range(-1.0..1.0)),
                random_psd(5, &mut rng),
            );
            let ab = wasserstein2_gaussian_fields(&g1, &g2).unwrap();
            let ba = wasserstein2_gaussian_fields(&g2, &g1).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1e-9));
        }

        #[test]
        fn univariate_distance_is_symmetric(
            ma in -10.0f64..10.0, va in 0.0f64..10.0,
            mb in -10.0f64..10.0, vb in 0.0f64..10.0,
        ) {
            let a = UnivariateGaussian { mean: ma, variance: va };
            let b = UnivariateGaussian { mean: mb, variance: vb };
            let ab = wasserstein2_univariate_gaussian(a, b).unwrap();
            let ba = wasserstein2_univariate_gaussian(b, a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1e-9));
        }

        #[test]
        fn empirical_distance_is_symmetric(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..40).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let ys: Vec<f64> = (0..40).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let ab = wasserstein2_empirical_1d(&xs, &ys).unwrap();
            let ba = wasserstein2_empirical_1d(&ys, &xs).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1e-9));
        }
    }
}
