//! Small dense/banded linear algebra layer.
//!
//! The FEM operators on the structured meshes used here are symmetric with a
//! tight band (tridiagonal in 1D, half-bandwidth `n` on the unit-square
//! mesh), so they are stored and factorized in band form. Dense symmetric
//! eigendecompositions go through LAPACK via `ndarray-linalg`.

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{EigValsh, Eigh, UPLO};

use crate::error::{Error, Result};

/// Symmetric banded matrix, lower storage.
///
/// `bands[(d, j)]` holds entry `(j + d, j)` for `d = 0..=bw`; entries beyond
/// the matrix edge are kept at zero.
#[derive(Debug, Clone)]
pub struct SymBand {
    n: usize,
    bw: usize,
    bands: Array2<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand {
            n,
            bw,
            bands: Array2::zeros((bw + 1, n)),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Read entry (i, j); zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i >= j { (j, i) } else { (i, j) };
        let d = hi - lo;
        if d > self.bw {
            0.0
        } else {
            self.bands[(d, lo)]
        }
    }

    /// Accumulate into entry (i, j) and its mirror.
    ///
    /// # Panics
    /// Panics if |i - j| exceeds the bandwidth.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (lo, hi) = if i >= j { (j, i) } else { (i, j) };
        let d = hi - lo;
        assert!(
            d <= self.bw,
            "entry ({i}, {j}) outside bandwidth {}",
            self.bw
        );
        self.bands[(d, lo)] += value;
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.n, self.n));
        for j in 0..self.n {
            for d in 0..=self.bw.min(self.n - 1 - j) {
                dense[(j + d, j)] = self.bands[(d, j)];
                dense[(j, j + d)] = self.bands[(d, j)];
            }
        }
        dense
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &Array1<f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = Array1::zeros(self.n);
        for j in 0..self.n {
            let xj = x[j];
            y[j] += self.bands[(0, j)] * xj;
            for d in 1..=self.bw.min(self.n - 1 - j) {
                let a = self.bands[(d, j)];
                y[j + d] += a * xj;
                y[j] += a * x[j + d];
            }
        }
        y
    }

    /// Y = X A for a row-major X whose rows are independent vectors.
    pub fn mul_rows(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.n);
        let mut y = Array2::zeros((x.nrows(), self.n));
        for (xr, mut yr) in x.outer_iter().zip(y.outer_iter_mut()) {
            for j in 0..self.n {
                let xj = xr[j];
                yr[j] += self.bands[(0, j)] * xj;
                for d in 1..=self.bw.min(self.n - 1 - j) {
                    let a = self.bands[(d, j)];
                    yr[j + d] += a * xj;
                    yr[j] += a * xr[j + d];
                }
            }
        }
        y
    }

    /// Banded Cholesky factorization A = L Lᵀ.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.bands.clone();
        for j in 0..n {
            let start = j.saturating_sub(bw);
            let mut diag = l[(0, j)];
            for k in start..j {
                let v = l[(j - k, k)];
                diag -= v * v;
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(Error::SingularSystem(format!(
                    "banded Cholesky broke down at pivot {j} (value {diag:.3e})"
                )));
            }
            let dj = diag.sqrt();
            l[(0, j)] = dj;
            let top = (j + bw).min(n - 1);
            for i in (j + 1)..=top {
                let mut s = l[(i - j, j)];
                let start_i = i.saturating_sub(bw).max(start);
                for k in start_i..j {
                    s -= l[(i - k, k)] * l[(j - k, k)];
                }
                l[(i - j, j)] = s / dj;
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

/// Lower banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Array2<f64>,
}

impl BandCholesky {
    /// Solve A x = b.
    pub fn solve_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        let mut x = b.clone();
        self.solve_slice(x.as_slice_mut().expect("contiguous"));
        x
    }

    /// Solve A Xᵀ = Bᵀ where every row of `rhs` is an independent
    /// right-hand side; the result has the same layout.
    pub fn solve_rows(&self, rhs: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(rhs.ncols(), self.n);
        let mut out = rhs.to_owned();
        for mut row in out.outer_iter_mut() {
            self.solve_slice(row.as_slice_mut().expect("contiguous"));
        }
        out
    }

    fn solve_slice(&self, x: &mut [f64]) {
        let n = self.n;
        let bw = self.bw;
        // forward substitution L y = b
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = x[i];
            for k in start..i {
                s -= self.l[(i - k, k)] * x[k];
            }
            x[i] = s / self.l[(0, i)];
        }
        // back substitution Lᵀ x = y
        for i in (0..n).rev() {
            let top = (i + bw).min(n - 1);
            let mut s = x[i];
            for k in (i + 1)..=top {
                s -= self.l[(k - i, i)] * x[k];
            }
            x[i] = s / self.l[(0, i)];
        }
    }
}

/// Force exact symmetry by averaging with the transpose.
pub fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Relative departure from symmetry, max |A - Aᵀ| / max |A|.
pub fn asymmetry(a: &ArrayView2<'_, f64>) -> f64 {
    let mut num = 0.0_f64;
    let mut den = 0.0_f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            num = num.max((a[(i, j)] - a[(j, i)]).abs());
            den = den.max(a[(i, j)].abs());
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Symmetric eigendecomposition (ascending eigenvalues, eigenvectors as
/// columns).
pub fn sym_eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    a.eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigendecomposition failed: {e}")))
}

/// Eigenvalues only, ascending.
pub fn sym_eigvalsh(a: &Array2<f64>) -> Result<Array1<f64>> {
    a.eigvalsh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigenvalues failed: {e}")))
}

/// Fix eigenvector signs so that the largest-magnitude entry of each column
/// is positive. Keeps factorizations of nearby matrices aligned, which the
/// common-random-number sampling in the experiments relies on.
pub fn canonicalize_columns(vecs: &mut Array2<f64>) {
    for mut col in vecs.columns_mut() {
        let mut best = 0.0_f64;
        let mut sign = 1.0_f64;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = if v < 0.0 { -1.0 } else { 1.0 };
            }
        }
        if sign < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}
