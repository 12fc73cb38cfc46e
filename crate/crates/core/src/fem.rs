//! P1 finite element operators on the structured meshes.
//!
//! Stiffness, mass and load assembly with homogeneous Dirichlet boundary
//! conditions eliminated (operators act on interior degrees of freedom
//! only), point evaluation of FE functions, a banded SPD direct solver and
//! discretisation error norms.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::field::Point;
use crate::linalg::{BandCholesky, SymBand};
use crate::mesh::{Mesh, Topology};
use crate::quadrature::{gl4_on_interval, TRI7};

/// Scalar conductivity field.
pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Assembled P1 system for one mesh: stiffness, mass and the shared SPD
/// factorization of the stiffness.
pub struct FemSystem {
    mesh: Mesh,
    stiffness: SymBand,
    mass: SymBand,
    conductivity: ScalarField,
    factor: BandCholesky,
}

impl FemSystem {
    /// Assemble both operators and factorize the stiffness.
    pub fn new<F>(mesh: Mesh, conductivity: F) -> Result<FemSystem>
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        let conductivity: ScalarField = Arc::new(conductivity);
        let stiffness = assemble_stiffness(&mesh, conductivity.as_ref())?;
        let mass = assemble_mass(&mesh);
        let factor = stiffness.cholesky()?;
        Ok(FemSystem {
            mesh,
            stiffness,
            mass,
            conductivity,
            factor,
        })
    }

    /// Unit conductivity system (the Poisson problem of the experiments).
    pub fn poisson(mesh: Mesh) -> Result<FemSystem> {
        FemSystem::new(mesh, |_| 1.0)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn stiffness(&self) -> &SymBand {
        &self.stiffness
    }

    pub fn mass(&self) -> &SymBand {
        &self.mass
    }

    pub fn conductivity(&self) -> &ScalarField {
        &self.conductivity
    }

    /// Solve A u = load, checking the residual against the solver
    /// contract |A u - f| <= 1e-10 |f|.
    pub fn solve(&self, load: &Array1<f64>) -> Result<Array1<f64>> {
        if load.len() != self.mesh.n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "load length {} != n_dofs {}",
                load.len(),
                self.mesh.n_dofs()
            )));
        }
        let u = self.factor.solve_vec(load);
        let residual = &self.stiffness.mul_vec(&u) - load;
        let rnorm = residual.dot(&residual).sqrt();
        let fnorm = load.dot(load).sqrt();
        if rnorm > 1e-10 * fnorm.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularSystem(format!(
                "solve residual {rnorm:.3e} exceeds 1e-10 * {fnorm:.3e}"
            )));
        }
        Ok(u)
    }

    /// Solve A Xᵀ = Bᵀ with every row of `rhs` an independent right-hand
    /// side.
    pub fn solve_rows(&self, rhs: ndarray::ArrayView2<'_, f64>) -> Array2<f64> {
        self.factor.solve_rows(rhs)
    }
}

/// Stiffness matrix A_ij = ∫ κ ∇φ_i·∇φ_j over interior basis functions.
///
/// κ is evaluated at the quadrature points of each element; evaluating
/// non-positive anywhere is an ellipticity violation.
pub fn assemble_stiffness<F>(mesh: &Mesh, kappa: &F) -> Result<SymBand>
where
    F: Fn(Point) -> f64 + ?Sized,
{
    let mut a = SymBand::zeros(mesh.n_dofs(), mesh.dof_bandwidth());
    match mesh.topology() {
        Topology::Interval { cells, .. } => {
            for cell in cells {
                let x0 = mesh.nodes()[cell[0]][0];
                let x1 = mesh.nodes()[cell[1]][0];
                let len = x1 - x0;
                let (nodes, weights) = gl4_on_interval(x0, x1);
                let mut kint = 0.0;
                for (x, w) in nodes.iter().zip(weights.iter()) {
                    let k = kappa([*x, 0.0]);
                    if k <= 0.0 {
                        return Err(Error::EllipticityViolation {
                            x: *x,
                            y: 0.0,
                            value: k,
                        });
                    }
                    kint += w * k;
                }
                let scale = kint / (len * len);
                let local = [[scale, -scale], [-scale, scale]];
                scatter(&mut a, mesh, cell, &local);
            }
        }
        Topology::TriangleGrid { triangles, .. } => {
            for tri in triangles {
                let p: Vec<Point> = tri.iter().map(|&v| mesh.nodes()[v]).collect();
                let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                    - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
                let area = 0.5 * area2;
                // gradient coefficients: grad phi_i = (b_i, c_i) / (2 area)
                let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
                let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
                let mut kint = 0.0;
                for (lam, w) in TRI7.iter() {
                    let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
                    let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
                    let k = kappa([x, y]);
                    if k <= 0.0 {
                        return Err(Error::EllipticityViolation { x, y, value: k });
                    }
                    kint += w * k;
                }
                kint *= area;
                let mut local = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        local[i][j] = kint * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area * area);
                    }
                }
                scatter(&mut a, mesh, tri, &local);
            }
        }
    }
    Ok(a)
}

/// Exact P1 mass matrix M_ij = ∫ φ_i φ_j.
pub fn assemble_mass(mesh: &Mesh) -> SymBand {
    let mut m = SymBand::zeros(mesh.n_dofs(), mesh.dof_bandwidth());
    match mesh.topology() {
        Topology::Interval { cells, .. } => {
            for cell in cells {
                let len = mesh.nodes()[cell[1]][0] - mesh.nodes()[cell[0]][0];
                let local = [[len / 3.0, len / 6.0], [len / 6.0, len / 3.0]];
                scatter(&mut m, mesh, cell, &local);
            }
        }
        Topology::TriangleGrid { triangles, .. } => {
            for tri in triangles {
                let area = triangle_area(mesh, tri);
                let d = area / 6.0;
                let o = area / 12.0;
                let local = [[d, o, o], [o, d, o], [o, o, d]];
                scatter(&mut m, mesh, tri, &local);
            }
        }
    }
    m
}

/// Mass inner products of the interior basis against the full nodal basis,
/// boundary hats included: rows indexed by DOF, entries (node, ∫ φ_i ψ_a).
/// This is the sandwich that turns a kernel interpolated on all nodes into
/// a load-vector covariance.
pub fn assemble_mass_full(mesh: &Mesh) -> Vec<Vec<(usize, f64)>> {
    let mut rows: Vec<std::collections::BTreeMap<usize, f64>> =
        vec![std::collections::BTreeMap::new(); mesh.n_dofs()];
    let mut accumulate = |verts: &[usize], local: &[f64], mesh: &Mesh| {
        let k = verts.len();
        for i in 0..k {
            let Some(dof) = mesh.dof_of_node(verts[i]) else {
                continue;
            };
            for j in 0..k {
                *rows[dof].entry(verts[j]).or_insert(0.0) += local[i * k + j];
            }
        }
    };
    match mesh.topology() {
        Topology::Interval { cells, .. } => {
            for cell in cells {
                let len = mesh.nodes()[cell[1]][0] - mesh.nodes()[cell[0]][0];
                let local = [len / 3.0, len / 6.0, len / 6.0, len / 3.0];
                accumulate(cell, &local, mesh);
            }
        }
        Topology::TriangleGrid { triangles, .. } => {
            for tri in triangles {
                let area = triangle_area(mesh, tri);
                let d = area / 6.0;
                let o = area / 12.0;
                let local = [d, o, o, o, d, o, o, o, d];
                accumulate(tri, &local, mesh);
            }
        }
    }
    rows.into_iter()
        .map(|row| row.into_iter().collect())
        .collect()
}

/// Load vector f_i = ∫ f φ_i via per-element Gauss quadrature.
pub fn assemble_load<F>(mesh: &Mesh, f: &F) -> Array1<f64>
where
    F: Fn(Point) -> f64 + ?Sized,
{
    let mut load = Array1::zeros(mesh.n_dofs());
    match mesh.topology() {
        Topology::Interval { cells, .. } => {
            for cell in cells {
                let x0 = mesh.nodes()[cell[0]][0];
                let x1 = mesh.nodes()[cell[1]][0];
                let len = x1 - x0;
                let (nodes, weights) = gl4_on_interval(x0, x1);
                for (x, w) in nodes.iter().zip(weights.iter()) {
                    let t = (x - x0) / len;
                    let value = w * f([*x, 0.0]);
                    for (local, phi) in [(0usize, 1.0 - t), (1, t)] {
                        if let Some(dof) = mesh.dof_of_node(cell[local]) {
                            load[dof] += value * phi;
                        }
                    }
                }
            }
        }
        Topology::TriangleGrid { triangles, .. } => {
            for tri in triangles {
                let p: Vec<Point> = tri.iter().map(|&v| mesh.nodes()[v]).collect();
                let area = triangle_area(mesh, tri);
                for (lam, w) in TRI7.iter() {
                    let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
                    let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
                    let value = area * w * f([x, y]);
                    for local in 0..3 {
                        if let Some(dof) = mesh.dof_of_node(tri[local]) {
                            load[dof] += value * lam[local];
                        }
                    }
                }
            }
        }
    }
    load
}

fn scatter<const K: usize>(
    target: &mut SymBand,
    mesh: &Mesh,
    verts: &[usize; K],
    local: &[[f64; K]; K],
) {
    for i in 0..K {
        let Some(di) = mesh.dof_of_node(verts[i]) else {
            continue;
        };
        for j in 0..K {
            let Some(dj) = mesh.dof_of_node(verts[j]) else {
                continue;
            };
            if di <= dj {
                target.add(dj, di, local[i][j]);
            }
        }
    }
}

fn triangle_area(mesh: &Mesh, tri: &[usize; 3]) -> f64 {
    let a = mesh.nodes()[tri[0]];
    let b = mesh.nodes()[tri[1]];
    let c = mesh.nodes()[tri[2]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

/// Sparse evaluation matrix P with P_ki = φ_i(x_k) over interior basis
/// functions; rows for boundary points are empty.
#[derive(Debug, Clone)]
pub struct InterpolationMatrix {
    points: Vec<Point>,
    rows: Vec<Vec<(usize, f64)>>,
    n_dofs: usize,
}

impl InterpolationMatrix {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.points.len(), self.n_dofs));
        for (k, row) in self.rows.iter().enumerate() {
            for &(dof, v) in row {
                dense[(k, dof)] = v;
            }
        }
        dense
    }

    /// P·x, the FE function with DOF vector `x` evaluated at the points.
    pub fn apply(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.points.len());
        for (k, row) in self.rows.iter().enumerate() {
            out[k] = row.iter().map(|&(dof, v)| v * x[dof]).sum();
        }
        out
    }

    /// P·X for a dense matrix whose rows are indexed by DOF.
    pub fn apply_mat(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.points.len(), x.ncols()));
        for (k, row) in self.rows.iter().enumerate() {
            for &(dof, v) in row {
                let src = x.row(dof);
                let mut dst = out.row_mut(k);
                dst.scaled_add(v, &src);
            }
        }
        out
    }
}

/// Evaluate all interior P1 basis functions at the given points.
pub fn basis_eval_matrix(mesh: &Mesh, points: &[Point]) -> Result<InterpolationMatrix> {
    let mut rows = Vec::with_capacity(points.len());
    for &p in points {
        let (element, lambda) = mesh.locate(p)?;
        let verts = mesh.element_nodes(element);
        let mut row = Vec::new();
        for (local, &vert) in verts.iter().enumerate() {
            if lambda[local].abs() < 1e-14 {
                continue;
            }
            if let Some(dof) = mesh.dof_of_node(vert) {
                row.push((dof, lambda[local]));
            }
        }
        rows.push(row);
    }
    Ok(InterpolationMatrix {
        points: points.to_vec(),
        rows,
        n_dofs: mesh.n_dofs(),
    })
}

/// L² and H¹-seminorm errors of the FE solution with DOF vector `dofs`
/// against an exact solution, via per-element quadrature.
pub fn error_norms<U, G>(mesh: &Mesh, dofs: &Array1<f64>, u_exact: U, grad_exact: G) -> (f64, f64)
where
    U: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
{
    let value_at = |node: usize| mesh.dof_of_node(node).map_or(0.0, |d| dofs[d]);
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    match mesh.topology() {
        Topology::Interval { cells, .. } => {
            for cell in cells {
                let x0 = mesh.nodes()[cell[0]][0];
                let x1 = mesh.nodes()[cell[1]][0];
                let len = x1 - x0;
                let u0 = value_at(cell[0]);
                let u1 = value_at(cell[1]);
                let slope = (u1 - u0) / len;
                let (nodes, weights) = gl4_on_interval(x0, x1);
                for (x, w) in nodes.iter().zip(weights.iter()) {
                    let t = (x - x0) / len;
                    let uh = (1.0 - t) * u0 + t * u1;
                    let du = u_exact([*x, 0.0]) - uh;
                    l2 += w * du * du;
                    let dg = grad_exact([*x, 0.0])[0] - slope;
                    h1 += w * dg * dg;
                }
            }
        }
        Topology::TriangleGrid { triangles, .. } => {
            for tri in triangles {
                let p: Vec<Point> = tri.iter().map(|&v| mesh.nodes()[v]).collect();
                let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                    - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
                let area = 0.5 * area2;
                let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
                let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
                let u = [value_at(tri[0]), value_at(tri[1]), value_at(tri[2])];
                let gx: f64 = (0..3).map(|i| u[i] * b[i]).sum::<f64>() / (2.0 * area);
                let gy: f64 = (0..3).map(|i| u[i] * c[i]).sum::<f64>() / (2.0 * area);
                for (lam, w) in TRI7.iter() {
                    let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
                    let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
                    let uh = lam[0] * u[0] + lam[1] * u[1] + lam[2] * u[2];
                    let du = u_exact([x, y]) - uh;
                    l2 += area.abs() * w * du * du;
                    let g = grad_exact([x, y]);
                    let dgx = g[0] - gx;
                    let dgy = g[1] - gy;
                    h1 += area.abs() * w * (dgx * dgx + dgy * dgy);
                }
            }
        }
    }
    (l2.sqrt(), h1.sqrt())
}
