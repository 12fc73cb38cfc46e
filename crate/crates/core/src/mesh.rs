//! Uniform simplicial meshes of the unit interval and unit square.
//!
//! Both constructors produce the structured families used throughout: the
//! interval split into equal cells, and the unit square split into `n x n`
//! squares each cut along the lower-left to upper-right diagonal. Meshes are
//! immutable after construction.

use crate::error::{Error, Result};
use crate::field::Point;

/// Element connectivity. Interval cells are index pairs, triangles index
/// triples in counter-clockwise order.
#[derive(Debug, Clone)]
pub enum Topology {
    Interval {
        n_cells: usize,
        cells: Vec<[usize; 2]>,
    },
    TriangleGrid {
        n_per_side: usize,
        triangles: Vec<[usize; 3]>,
    },
}

/// Simplicial partition of `[0,1]` or `[0,1]²` with homogeneous Dirichlet
/// boundary bookkeeping.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    topology: Topology,
    interior_nodes: Vec<usize>,
    boundary_nodes: Vec<usize>,
    /// node index -> degree-of-freedom index (interior nodes only)
    dof_of_node: Vec<Option<usize>>,
    h: f64,
}

/// Uniform mesh of [0, 1] with `n_cells` cells.
///
/// `n_cells >= 2` so at least one interior degree of freedom exists.
pub fn build_interval_mesh(n_cells: usize) -> Result<Mesh> {
    if n_cells < 2 {
        return Err(Error::InvalidArgument(format!(
            "interval mesh needs n_cells >= 2 (no interior node otherwise), got {n_cells}"
        )));
    }
    let h = 1.0 / n_cells as f64;
    let nodes: Vec<Point> = (0..=n_cells).map(|i| [i as f64 * h, 0.0]).collect();
    let cells: Vec<[usize; 2]> = (0..n_cells).map(|i| [i, i + 1]).collect();
    let interior_nodes: Vec<usize> = (1..n_cells).collect();
    let boundary_nodes = vec![0, n_cells];
    let mut dof_of_node = vec![None; nodes.len()];
    for (dof, &node) in interior_nodes.iter().enumerate() {
        dof_of_node[node] = Some(dof);
    }
    Ok(Mesh {
        nodes,
        topology: Topology::Interval { n_cells, cells },
        interior_nodes,
        boundary_nodes,
        dof_of_node,
        h,
    })
}

/// Structured triangulation of [0, 1]² on an `n x n` grid of squares, each
/// split along the lower-left to upper-right diagonal. The mesh width is
/// the triangle diameter h = sqrt(2)/n.
pub fn build_unit_square_mesh(n_per_side: usize) -> Result<Mesh> {
    if n_per_side < 2 {
        return Err(Error::InvalidArgument(format!(
            "unit square mesh needs n_per_side >= 2 (no interior node otherwise), got {n_per_side}"
        )));
    }
    let n = n_per_side;
    let dx = 1.0 / n as f64;
    let node_id = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 * dx, j as f64 * dx]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = node_id(i, j);
            let b = node_id(i + 1, j);
            let c = node_id(i + 1, j + 1);
            let d = node_id(i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut interior_nodes = Vec::with_capacity((n - 1) * (n - 1));
    let mut boundary_nodes = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            if i == 0 || j == 0 || i == n || j == n {
                boundary_nodes.push(node_id(i, j));
            } else {
                interior_nodes.push(node_id(i, j));
            }
        }
    }
    let mut dof_of_node = vec![None; nodes.len()];
    for (dof, &node) in interior_nodes.iter().enumerate() {
        dof_of_node[node] = Some(dof);
    }
    Ok(Mesh {
        nodes,
        topology: Topology::TriangleGrid {
            n_per_side,
            triangles,
        },
        interior_nodes,
        boundary_nodes,
        dof_of_node,
        h: std::f64::consts::SQRT_2 / n as f64,
    })
}

impl Mesh {
    pub fn dim(&self) -> usize {
        match self.topology {
            Topology::Interval { .. } => 1,
            Topology::TriangleGrid { .. } => 2,
        }
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn n_elements(&self) -> usize {
        match &self.topology {
            Topology::Interval { cells, .. } => cells.len(),
            Topology::TriangleGrid { triangles, .. } => triangles.len(),
        }
    }

    /// Interior node indices, in degree-of-freedom order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Number of degrees of freedom (interior nodes).
    pub fn n_dofs(&self) -> usize {
        self.interior_nodes.len()
    }

    /// DOF index of a node, if interior.
    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    /// Coordinates of the interior nodes, in DOF order.
    pub fn interior_points(&self) -> Vec<Point> {
        self.interior_nodes.iter().map(|&n| self.nodes[n]).collect()
    }

    /// Length / area of one element.
    pub fn element_measure(&self, e: usize) -> f64 {
        match &self.topology {
            Topology::Interval { cells, .. } => {
                let [a, b] = cells[e];
                self.nodes[b][0] - self.nodes[a][0]
            }
            Topology::TriangleGrid { triangles, .. } => {
                let [a, b, c] = triangles[e];
                triangle_area(self.nodes[a], self.nodes[b], self.nodes[c])
            }
        }
    }

    /// Half-bandwidth of the DOF-DOF adjacency under the natural node
    /// ordering. Used to size the banded operator storage.
    pub fn dof_bandwidth(&self) -> usize {
        match &self.topology {
            Topology::Interval { .. } => 1,
            Topology::TriangleGrid { n_per_side, .. } => *n_per_side,
        }
    }

    /// Locate the element containing `p` and its barycentric coordinates
    /// with respect to that element's vertices.
    ///
    /// Points on element interfaces resolve to one of the adjacent elements;
    /// which one is immaterial because P1 basis values agree there.
    pub fn locate(&self, p: Point) -> Result<(usize, Vec<f64>)> {
        const TOL: f64 = 1e-12;
        match &self.topology {
            Topology::Interval { n_cells, .. } => {
                let x = p[0];
                if !(-TOL..=1.0 + TOL).contains(&x) {
                    return Err(Error::OutOfDomain(p));
                }
                let n = *n_cells;
                let cell = ((x * n as f64).floor() as usize).min(n - 1);
                let x0 = cell as f64 / n as f64;
                let t = ((x - x0) * n as f64).clamp(0.0, 1.0);
                Ok((cell, vec![1.0 - t, t]))
            }
            Topology::TriangleGrid { n_per_side, .. } => {
                let (x, y) = (p[0], p[1]);
                if !(-TOL..=1.0 + TOL).contains(&x) || !(-TOL..=1.0 + TOL).contains(&y) {
                    return Err(Error::OutOfDomain(p));
                }
                let n = *n_per_side;
                let i = ((x * n as f64).floor() as usize).min(n - 1);
                let j = ((y * n as f64).floor() as usize).min(n - 1);
                // local coordinates in the square cell
                let s = (x * n as f64 - i as f64).clamp(0.0, 1.0);
                let t = (y * n as f64 - j as f64).clamp(0.0, 1.0);
                let square = j * n + i;
                if t <= s {
                    // lower triangle (a, b, c): lambda = (1-s, s-t, t)
                    Ok((2 * square, vec![1.0 - s, s - t, t]))
                } else {
                    // upper triangle (a, c, d): lambda = (1-t, s, t-s)
                    Ok((2 * square + 1, vec![1.0 - t, s, t - s]))
                }
            }
        }
    }

    /// Vertex indices of an element.
    pub fn element_nodes(&self, e: usize) -> &[usize] {
        match &self.topology {
            Topology::Interval { cells, .. } => &cells[e],
            Topology::TriangleGrid { triangles, .. } => &triangles[e],
        }
    }

    /// Smallest interior angle over all triangles (π/2 for interval meshes,
    /// where the notion is vacuous).
    pub fn min_angle(&self) -> f64 {
        match &self.topology {
            Topology::Interval { .. } => std::f64::consts::FRAC_PI_2,
            Topology::TriangleGrid { triangles, .. } => {
                let mut min = f64::INFINITY;
                for t in triangles {
                    for k in 0..3 {
                        let o = self.nodes[t[k]];
                        let u = self.nodes[t[(k + 1) % 3]];
                        let v = self.nodes[t[(k + 2) % 3]];
                        let du = [u[0] - o[0], u[1] - o[1]];
                        let dv = [v[0] - o[0], v[1] - o[1]];
                        let dot = du[0] * dv[0] + du[1] * dv[1];
                        let nu = (du[0] * du[0] + du[1] * du[1]).sqrt();
                        let nv = (dv[0] * dv[0] + dv[1] * dv[1]).sqrt();
                        min = min.min((dot / (nu * nv)).clamp(-1.0, 1.0).acos());
                    }
                }
                min
            }
        }
    }
}

fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}
