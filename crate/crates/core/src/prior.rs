//! The finite element prior over PDE solutions.
//!
//! Pushing the Gaussian forcing through the discrete solution operator
//! Φᵀ A⁻¹ F_h gives a Gaussian process with mean Φ(x)ᵀ A⁻¹ f̄ and covariance
//! Φ(x)ᵀ A⁻¹ K_F A⁻¹ Φ(y), where K_F is the covariance of the random load
//! vector. This module assembles K_F and restricts the process to point
//! sets and reference grids.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::fem::{assemble_load, basis_eval_matrix, FemSystem};
use crate::field::{GaussianField, GaussianSource, Grid, Point};
use crate::forcing::ForcingModel;
use crate::linalg::symmetrize;
use crate::mesh::Topology;
use crate::quadrature::{gl4_on_interval, TRI7};

/// How the load covariance K_F = F_h K F_h† is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KfMode {
    /// Element-pair quadrature of ∫∫ φ_i(x) k_f(x,y) φ_j(y); exact up to the
    /// quadrature order. Quadratic in the number of quadrature points, so
    /// intended for 1D meshes and small 2D meshes.
    ExactQuadrature,
    /// Nodal approximation: the kernel is interpolated on the full nodal
    /// basis and sandwiched between mass blocks, K_F ≈ S C Sᵀ with
    /// S_ia = ∫φ_i ψ_a and C the kernel matrix at all nodes. Second-order
    /// accurate for smooth kernels.
    NodalMass,
}

impl std::fmt::Display for KfMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KfMode::ExactQuadrature => write!(f, "exact-quadrature"),
            KfMode::NodalMass => write!(f, "nodal-mass"),
        }
    }
}

/// Covariance matrix of the random load vector.
#[derive(Debug, Clone)]
pub struct ForcingCovariance {
    pub matrix: Array2<f64>,
    pub mode: KfMode,
}

/// Hard cap on quadrature nodes for the exact-quadrature mode; beyond this
/// the kernel Gram matrix no longer fits desk-scale memory and the nodal
/// approximation should be used instead.
const MAX_QUAD_POINTS: usize = 8192;

/// Assemble K_F for the given system and forcing model.
pub fn assemble_forcing_covariance(
    fem: &FemSystem,
    model: &ForcingModel,
    mode: KfMode,
) -> Result<ForcingCovariance> {
    let mesh = fem.mesh();
    let n_dofs = mesh.n_dofs();
    let matrix = match mode {
        KfMode::NodalMass => {
            // Interpolate the kernel on the full nodal basis (boundary hats
            // included, or the interpolant collapses near the boundary) and
            // sandwich with the rectangular mass block: K_F = S C Sᵀ.
            let all_nodes = mesh.nodes().to_vec();
            let c = model.kernel_matrix(&all_nodes, &all_nodes);
            let s = crate::fem::assemble_mass_full(mesh);
            let mut t = Array2::zeros((n_dofs, all_nodes.len()));
            for (i, row) in s.iter().enumerate() {
                for &(node, v) in row {
                    let src = c.row(node);
                    let mut dst = t.row_mut(i);
                    dst.scaled_add(v, &src);
                }
            }
            let mut kf = Array2::zeros((n_dofs, n_dofs));
            for (j, row) in s.iter().enumerate() {
                for &(node, v) in row {
                    let src = t.column(node);
                    let mut dst = kf.column_mut(j);
                    dst.scaled_add(v, &src);
                }
            }
            symmetrize(&mut kf);
            kf
        }
        KfMode::ExactQuadrature => {
            // Quadrature nodes with weighted basis values per node.
            let (nodes, wphi) = weighted_basis_at_quadrature(fem);
            let n_quad = nodes.len();
            if n_quad > MAX_QUAD_POINTS {
                return Err(Error::InvalidArgument(format!(
                    "exact-quadrature forcing covariance with {n_quad} quadrature points \
                     exceeds the {MAX_QUAD_POINTS}-point cap; use nodal-mass for this mesh"
                )));
            }
            // K_F = Eᵀ K_qq E with E the weighted basis evaluations.
            let e = {
                let mut dense = Array2::zeros((n_quad, n_dofs));
                for (q, row) in wphi.iter().enumerate() {
                    for &(dof, v) in row {
                        dense[(q, dof)] = v;
                    }
                }
                dense
            };
            let mut t = Array2::zeros((n_quad, n_dofs));
            const BLOCK: usize = 1024;
            let mut start = 0;
            while start < n_quad {
                let stop = (start + BLOCK).min(n_quad);
                let k_block = model.kernel_matrix(&nodes, &nodes[start..stop]);
                t += &k_block.dot(&e.slice(ndarray::s![start..stop, ..]));
                start = stop;
            }
            let mut kf = e.t().dot(&t);
            symmetrize(&mut kf);
            kf
        }
    };
    Ok(ForcingCovariance { matrix, mode })
}

/// All element quadrature nodes plus, per node, the weighted interior basis
/// values w_q φ_i(x_q).
fn weighted_basis_at_quadrature(fem: &FemSystem) -> (Vec<Point>, Vec<Vec<(usize, f64)>>) {
    let mesh = fem.mesh();
    let mut nodes = Vec::new();
    let mut rows = Vec::new();
    match mesh.topology() {
        Topology::Interval { cells, .. } => {
            for cell in cells {
                let x0 = mesh.nodes()[cell[0]][0];
                let x1 = mesh.nodes()[cell[1]][0];
                let (qx, qw) = gl4_on_interval(x0, x1);
                for (x, w) in qx.iter().zip(qw.iter()) {
                    let t = (x - x0) / (x1 - x0);
                    nodes.push([*x, 0.0]);
                    let mut row = Vec::new();
                    for (local, phi) in [(0usize, 1.0 - t), (1, t)] {
                        if let Some(dof) = mesh.dof_of_node(cell[local]) {
                            row.push((dof, w * phi));
                        }
                    }
                    rows.push(row);
                }
            }
        }
        Topology::TriangleGrid { triangles, .. } => {
            for (e, tri) in triangles.iter().enumerate() {
                let area = mesh.element_measure(e);
                let p: Vec<Point> = tri.iter().map(|&v| mesh.nodes()[v]).collect();
                for (lam, w) in TRI7.iter() {
                    let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
                    let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
                    nodes.push([x, y]);
                    let mut row = Vec::new();
                    for local in 0..3 {
                        if let Some(dof) = mesh.dof_of_node(tri[local]) {
                            row.push((dof, area * w * lam[local]));
                        }
                    }
                    rows.push(row);
                }
            }
        }
    }
    (nodes, rows)
}

/// The statFEM prior as an evaluable Gaussian source.
pub struct StatFemPrior<'a> {
    fem: &'a FemSystem,
    kf: &'a ForcingCovariance,
    /// A⁻¹ f̄, the DOF vector of the prior mean.
    mean_dofs: Array1<f64>,
}

impl<'a> StatFemPrior<'a> {
    pub fn new(
        fem: &'a FemSystem,
        kf: &'a ForcingCovariance,
        model: &ForcingModel,
    ) -> Result<StatFemPrior<'a>> {
        if kf.matrix.nrows() != fem.mesh().n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "forcing covariance size {} does not match {} DOFs",
                kf.matrix.nrows(),
                fem.mesh().n_dofs()
            )));
        }
        let load = assemble_load(fem.mesh(), &|p| model.mean(p));
        let mean_dofs = fem.solve(&load)?;
        Ok(StatFemPrior { fem, kf, mean_dofs })
    }

    /// B = P A⁻¹ for the evaluation matrix at `pts`, row-major with one row
    /// per point. Solved with n_dofs or n_points right-hand sides, whichever
    /// is fewer.
    fn propagated_basis(&self, pts: &[Point]) -> Result<Array2<f64>> {
        let mesh = self.fem.mesh();
        let p = basis_eval_matrix(mesh, pts)?;
        let n_dofs = mesh.n_dofs();
        if n_dofs <= pts.len() {
            let inv = self.fem.solve_rows(Array2::eye(n_dofs).view());
            Ok(p.apply_mat(&inv))
        } else {
            Ok(self.fem.solve_rows(p.to_dense().view()))
        }
    }
}

impl GaussianSource for StatFemPrior<'_> {
    fn mean_at(&self, pts: &[Point]) -> Result<Array1<f64>> {
        let p = basis_eval_matrix(self.fem.mesh(), pts)?;
        Ok(p.apply(&self.mean_dofs))
    }

    fn cov_between(&self, a: &[Point], b: &[Point]) -> Result<Array2<f64>> {
        let ba = self.propagated_basis(a)?;
        let t = ba.dot(&self.kf.matrix);
        if a == b {
            let mut cov = t.dot(&ba.t());
            symmetrize(&mut cov);
            Ok(cov)
        } else {
            let bb = self.propagated_basis(b)?;
            Ok(t.dot(&bb.t()))
        }
    }
}

/// Restrict the statFEM prior to a reference grid.
pub fn statfem_prior_on_grid(
    fem: &FemSystem,
    kf: &ForcingCovariance,
    model: &ForcingModel,
    grid: &Grid,
) -> Result<GaussianField> {
    StatFemPrior::new(fem, kf, model)?.field_on_grid(grid)
}
